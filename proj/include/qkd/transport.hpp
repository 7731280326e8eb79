#pragma once

#include <condition_variable>
#include <deque>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <string>

#include <json.hpp>

namespace qkd {

struct TransportError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ProtocolError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// One classical-channel message. On the wire: 4-byte big-endian length, then
// a JSON document {"type": ..., "body": ...}.
struct Message {
    std::string type;
    nlohmann::json body;

    std::string encode() const;
    static Message decode(const std::string& payload);
};

class Transport {
public:
    virtual ~Transport() = default;
    virtual void send(const Message& msg) = 0;
    virtual Message recv() = 0;

    // recv() that also checks the expected message type.
    Message expect(const std::string& type);
};

// In-process bidirectional queue pair for loopback sessions and tests.
class LoopbackTransport : public Transport {
public:
    void send(const Message& msg) override;
    Message recv() override;
    void close();

    static std::pair<std::unique_ptr<LoopbackTransport>, std::unique_ptr<LoopbackTransport>>
    make_pair();

private:
    struct Queue {
        std::mutex mu;
        std::condition_variable cv;
        std::deque<std::string> items;
        bool closed = false;
    };
    std::shared_ptr<Queue> tx_, rx_;
};

// Framed messages over a connected TCP socket.
class TcpTransport : public Transport {
public:
    explicit TcpTransport(int fd) : fd_(fd) {}
    ~TcpTransport() override;
    TcpTransport(const TcpTransport&) = delete;
    TcpTransport& operator=(const TcpTransport&) = delete;

    void send(const Message& msg) override;
    Message recv() override;

    static std::unique_ptr<TcpTransport> connect(const std::string& host, uint16_t port);
    static std::unique_ptr<TcpTransport> listen_accept(const std::string& bind_addr, uint16_t port);

private:
    int fd_;
};

}  // namespace qkd
