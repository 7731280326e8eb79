#include "qkd/transport.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cstring>

namespace qkd {

std::string Message::encode() const {
    nlohmann::json doc;
    doc["type"] = type;
    doc["body"] = body;
    return doc.dump();
}

Message Message::decode(const std::string& payload) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(payload);
    } catch (const nlohmann::json::exception& e) {
        throw ProtocolError(std::string("malformed message: ") + e.what());
    }
    if (!doc.contains("type") || !doc["type"].is_string())
        throw ProtocolError("message without type");
    return Message{doc["type"].get<std::string>(), doc.value("body", nlohmann::json::object())};
}

Message Transport::expect(const std::string& type) {
    Message m = recv();
    if (m.type == "ABORT" && type != "ABORT")
        throw ProtocolError("peer aborted: " + m.body.value("reason", std::string("unknown")));
    if (m.type != type)
        throw ProtocolError("expected " + type + ", got " + m.type);
    return m;
}

void LoopbackTransport::send(const Message& msg) {
    std::lock_guard<std::mutex> lock(tx_->mu);
    if (tx_->closed) throw TransportError("loopback: peer closed");
    tx_->items.push_back(msg.encode());
    tx_->cv.notify_one();
}

Message LoopbackTransport::recv() {
    std::unique_lock<std::mutex> lock(rx_->mu);
    rx_->cv.wait(lock, [this] { return !rx_->items.empty() || rx_->closed; });
    if (rx_->items.empty()) throw TransportError("loopback: closed");
    std::string payload = std::move(rx_->items.front());
    rx_->items.pop_front();
    return Message::decode(payload);
}

void LoopbackTransport::close() {
    for (auto& q : {tx_, rx_}) {
        std::lock_guard<std::mutex> lock(q->mu);
        q->closed = true;
        q->cv.notify_all();
    }
}

std::pair<std::unique_ptr<LoopbackTransport>, std::unique_ptr<LoopbackTransport>>
LoopbackTransport::make_pair() {
    auto q1 = std::make_shared<Queue>();
    auto q2 = std::make_shared<Queue>();
    auto a = std::make_unique<LoopbackTransport>();
    auto b = std::make_unique<LoopbackTransport>();
    a->tx_ = q1;
    a->rx_ = q2;
    b->tx_ = q2;
    b->rx_ = q1;
    return {std::move(a), std::move(b)};
}

TcpTransport::~TcpTransport() {
    if (fd_ >= 0) ::close(fd_);
}

namespace {
void write_all(int fd, const void* buf, size_t len) {
    const char* p = static_cast<const char*>(buf);
    while (len > 0) {
        ssize_t n = ::send(fd, p, len, MSG_NOSIGNAL);
        if (n <= 0) throw TransportError("send failed: " + std::string(std::strerror(errno)));
        p += n;
        len -= static_cast<size_t>(n);
    }
}

void read_all(int fd, void* buf, size_t len) {
    char* p = static_cast<char*>(buf);
    while (len > 0) {
        ssize_t n = ::recv(fd, p, len, 0);
        if (n == 0) throw TransportError("connection closed by peer");
        if (n < 0) throw TransportError("recv failed: " + std::string(std::strerror(errno)));
        p += n;
        len -= static_cast<size_t>(n);
    }
}
}  // namespace

void TcpTransport::send(const Message& msg) {
    const std::string payload = msg.encode();
    if (payload.size() > 0x7fffffffu) throw TransportError("message too large");
    const uint32_t len = htonl(static_cast<uint32_t>(payload.size()));
    write_all(fd_, &len, 4);
    write_all(fd_, payload.data(), payload.size());
}

Message TcpTransport::recv() {
    uint32_t len_be = 0;
    read_all(fd_, &len_be, 4);
    const uint32_t len = ntohl(len_be);
    if (len > 0x7fffffffu) throw TransportError("oversized frame");
    std::string payload(len, '\0');
    read_all(fd_, payload.data(), len);
    return Message::decode(payload);
}

std::unique_ptr<TcpTransport> TcpTransport::connect(const std::string& host, uint16_t port) {
    addrinfo hints{};
    hints.ai_family = AF_UNSPEC;
    hints.ai_socktype = SOCK_STREAM;
    addrinfo* res = nullptr;
    if (getaddrinfo(host.c_str(), std::to_string(port).c_str(), &hints, &res) != 0 || !res)
        throw TransportError("cannot resolve " + host);
    int fd = -1;
    for (addrinfo* ai = res; ai; ai = ai->ai_next) {
        fd = ::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
        if (fd < 0) continue;
        if (::connect(fd, ai->ai_addr, ai->ai_addrlen) == 0) break;
        ::close(fd);
        fd = -1;
    }
    freeaddrinfo(res);
    if (fd < 0) throw TransportError("cannot connect to " + host + ":" + std::to_string(port));
    int one = 1;
    setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
    return std::make_unique<TcpTransport>(fd);
}

std::unique_ptr<TcpTransport> TcpTransport::listen_accept(const std::string& bind_addr,
                                                          uint16_t port) {
    int lfd = ::socket(AF_INET, SOCK_STREAM, 0);
    if (lfd < 0) throw TransportError("socket failed");
    int one = 1;
    setsockopt(lfd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(port);
    if (bind_addr.empty() || bind_addr == "0.0.0.0") {
        addr.sin_addr.s_addr = INADDR_ANY;
    } else if (inet_pton(AF_INET, bind_addr.c_str(), &addr.sin_addr) != 1) {
        ::close(lfd);
        throw TransportError("bad bind address: " + bind_addr);
    }
    if (::bind(lfd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
        ::close(lfd);
        throw TransportError("bind failed: " + std::string(std::strerror(errno)));
    }
    if (::listen(lfd, 1) != 0) {
        ::close(lfd);
        throw TransportError("listen failed");
    }
    int fd = ::accept(lfd, nullptr, nullptr);
    ::close(lfd);
    if (fd < 0) throw TransportError("accept failed");
    setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
    return std::make_unique<TcpTransport>(fd);
}

}  // namespace qkd
