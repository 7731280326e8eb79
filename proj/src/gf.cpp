#include "qkd/gf.hpp"

#include <algorithm>

namespace qkd {

namespace {

int poly_degree(unsigned __int128 p) {
    int d = -1;
    while (p) {
        ++d;
        p >>= 1;
    }
    return d;
}

// remainder of a / f over GF(2)[x]
uint64_t poly_mod(unsigned __int128 a, uint64_t f, int deg_f) {
    int d = poly_degree(a);
    while (d >= deg_f) {
        a ^= static_cast<unsigned __int128>(f) << (d - deg_f);
        d = poly_degree(a);
    }
    return static_cast<uint64_t>(a);
}

uint64_t mulmod_slow(uint64_t a, uint64_t b, uint64_t f, int deg_f) {
    return poly_mod(clmul64(a, b), f, deg_f);
}

uint64_t poly_gcd(uint64_t a, uint64_t b) {
    while (b) {
        a = poly_mod(a, b, poly_degree(b));
        std::swap(a, b);
    }
    return a;
}

// x^(2^j) mod f by repeated squaring
uint64_t frobenius_power(int j, uint64_t f, int deg_f) {
    uint64_t h = 2;  // the polynomial x
    for (int i = 0; i < j; ++i) h = mulmod_slow(h, h, f, deg_f);
    return h;
}

// Rabin's test: f of degree l is irreducible over GF(2) iff
// x^(2^l) == x (mod f) and gcd(x^(2^(l/d)) - x, f) = 1 for every prime d | l.
bool is_irreducible_gf2(uint64_t f, int l) {
    const uint64_t x_red = poly_mod(2, f, l);  // x itself reduces when l == 1
    if (frobenius_power(l, f, l) != x_red) return false;
    int rem = l;
    for (int d = 2; d * d <= rem; ++d) {
        if (rem % d) continue;
        while (rem % d == 0) rem /= d;
        if (poly_gcd(frobenius_power(l / d, f, l) ^ x_red, f) != 1) return false;
    }
    if (rem > 1 && rem < l) {
        if (poly_gcd(frobenius_power(l / rem, f, l) ^ x_red, f) != 1) return false;
    }
    return true;
}

}  // namespace

GF2m::GF2m(int degree) : l_(degree) {
    if (degree < 1 || degree > 63) throw std::domain_error("GF2m: degree must be in [1, 63]");
    mask_ = (uint64_t{1} << l_) - 1;
    poly_ = 0;
    const uint64_t top = uint64_t{1} << l_;
    // constant term must be 1, otherwise x divides the candidate
    for (uint64_t low = 1; low <= mask_; low += 2) {
        if (is_irreducible_gf2(top | low, l_)) {
            poly_ = top | low;
            break;
        }
    }
    if (!poly_) throw std::logic_error("GF2m: no irreducible polynomial found");
    // mu = floor(x^{2l} / f) by long division
    unsigned __int128 rem = static_cast<unsigned __int128>(1) << (2 * l_);
    uint64_t q = 0;
    int d = poly_degree(rem);
    while (d >= l_) {
        q |= uint64_t{1} << (d - l_);
        rem ^= static_cast<unsigned __int128>(poly_) << (d - l_);
        d = poly_degree(rem);
    }
    mu_ = q;
}

uint64_t GF2m::pow(uint64_t a, uint64_t e) const {
    uint64_t r = 1, base = a & mask_;
    while (e) {
        if (e & 1) r = mul(r, base);
        base = mul(base, base);
        e >>= 1;
    }
    return r;
}

bool SmallField::is_prime_power(uint64_t n) {
    if (n < 2) return false;
    uint64_t p = 0;
    for (uint64_t d = 2; d * d <= n; ++d) {
        if (n % d == 0) {
            p = d;
            break;
        }
    }
    if (p == 0) return true;  // prime
    while (n % p == 0) n /= p;
    return n == 1;
}

namespace {

// polynomial helpers over GF(p), coefficient vectors with digit i on x^i
void trim(std::vector<uint32_t>& a) {
    while (!a.empty() && a.back() == 0) a.pop_back();
}

std::vector<uint32_t> poly_mul_p(const std::vector<uint32_t>& a, const std::vector<uint32_t>& b,
                                 uint64_t p) {
    if (a.empty() || b.empty()) return {};
    std::vector<uint32_t> c(a.size() + b.size() - 1, 0);
    for (size_t i = 0; i < a.size(); ++i)
        for (size_t j = 0; j < b.size(); ++j)
            c[i + j] = static_cast<uint32_t>((c[i + j] + uint64_t{a[i]} * b[j]) % p);
    trim(c);
    return c;
}

uint32_t inv_mod_p(uint32_t a, uint64_t p) {
    // p is a small prime, Fermat
    uint64_t r = 1, base = a % p, e = p - 2;
    while (e) {
        if (e & 1) r = r * base % p;
        base = base * base % p;
        e >>= 1;
    }
    return static_cast<uint32_t>(r);
}

// a mod b over GF(p), b non-empty with invertible leading coefficient
std::vector<uint32_t> poly_mod_p(std::vector<uint32_t> a, const std::vector<uint32_t>& b,
                                 uint64_t p) {
    const uint32_t lead_inv = inv_mod_p(b.back(), p);
    trim(a);
    while (a.size() >= b.size()) {
        const uint64_t coef = uint64_t{a.back()} * lead_inv % p;
        const size_t shift = a.size() - b.size();
        for (size_t i = 0; i < b.size(); ++i) {
            const uint64_t sub = coef * b[i] % p;
            a[shift + i] = static_cast<uint32_t>((a[shift + i] + p - sub) % p);
        }
        trim(a);
    }
    return a;
}

// a monic polynomial is irreducible if no monic polynomial of degree
// 1..deg/2 divides it; field orders here are tiny, so brute force is fine
bool is_irreducible_gfp(const std::vector<uint32_t>& f, uint64_t p) {
    const size_t k = f.size() - 1;
    for (size_t d = 1; 2 * d <= k; ++d) {
        uint64_t count = 1;
        for (size_t i = 0; i < d; ++i) count *= p;
        for (uint64_t enc = 0; enc < count; ++enc) {
            std::vector<uint32_t> g(d + 1, 0);
            uint64_t v = enc;
            for (size_t i = 0; i < d; ++i) {
                g[i] = static_cast<uint32_t>(v % p);
                v /= p;
            }
            g[d] = 1;
            if (poly_mod_p(f, g, p).empty()) return false;
        }
    }
    return true;
}

}  // namespace

SmallField::SmallField(uint64_t order) : order_(order) {
    if (!is_prime_power(order)) throw std::domain_error("SmallField: order is not a prime power");
    p_ = order;
    for (uint64_t d = 2; d * d <= order; ++d) {
        if (order % d == 0) {
            p_ = d;
            break;
        }
    }
    k_ = 0;
    for (uint64_t v = order; v > 1; v /= p_) ++k_;
    if (k_ > 1) {
        uint64_t count = 1;
        for (int i = 0; i < k_; ++i) count *= p_;
        for (uint64_t enc = 0; enc < count; ++enc) {
            std::vector<uint32_t> f(static_cast<size_t>(k_) + 1, 0);
            uint64_t v = enc;
            for (int i = 0; i < k_; ++i) {
                f[static_cast<size_t>(i)] = static_cast<uint32_t>(v % p_);
                v /= p_;
            }
            f[static_cast<size_t>(k_)] = 1;
            if (f[0] != 0 && is_irreducible_gfp(f, p_)) {
                modulus_ = f;
                break;
            }
        }
        if (modulus_.empty()) throw std::logic_error("SmallField: no irreducible polynomial found");
    }
}

std::vector<uint32_t> SmallField::digits(uint64_t a) const {
    std::vector<uint32_t> d(static_cast<size_t>(k_), 0);
    for (int i = 0; i < k_; ++i) {
        d[static_cast<size_t>(i)] = static_cast<uint32_t>(a % p_);
        a /= p_;
    }
    return d;
}

uint64_t SmallField::undigits(const std::vector<uint32_t>& d) const {
    uint64_t a = 0;
    for (size_t i = d.size(); i-- > 0;) a = a * p_ + d[i];
    return a;
}

uint64_t SmallField::add(uint64_t a, uint64_t b) const {
    if (a >= order_ || b >= order_) throw std::domain_error("SmallField: element out of range");
    if (k_ == 1) return (a + b) % p_;
    auto da = digits(a), db = digits(b);
    for (size_t i = 0; i < da.size(); ++i)
        da[i] = static_cast<uint32_t>((uint64_t{da[i]} + db[i]) % p_);
    return undigits(da);
}

uint64_t SmallField::mul(uint64_t a, uint64_t b) const {
    if (a >= order_ || b >= order_) throw std::domain_error("SmallField: element out of range");
    if (k_ == 1) return a * b % p_;
    auto prod = poly_mul_p(digits(a), digits(b), p_);
    prod = poly_mod_p(std::move(prod), modulus_, p_);
    prod.resize(static_cast<size_t>(k_), 0);
    return undigits(prod);
}

uint64_t next_prime(uint64_t n) {
    if (n <= 2) return 2;
    for (uint64_t c = n | 1;; c += 2) {
        bool prime = true;
        for (uint64_t d = 3; d * d <= c; d += 2)
            if (c % d == 0) {
                prime = false;
                break;
            }
        if (prime) return c;
    }
}

}  // namespace qkd
