#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace tse {

// ---------------------------------------------------------------------------
// Errors. Every failure carries a short machine-parseable class that the CLI
// maps to an exit code ("io", "format", "validation", "config", "train",
// "digest", "usage").
// ---------------------------------------------------------------------------
class Error : public std::runtime_error {
public:
    Error(std::string cls, const std::string& msg)
        : std::runtime_error(msg), cls_(std::move(cls)) {}
    const std::string& cls() const { return cls_; }

private:
    std::string cls_;
};

[[noreturn]] inline void fail(const std::string& cls, const std::string& msg) {
    throw Error(cls, msg);
}

// ---------------------------------------------------------------------------
// Calendar dates. Stored as yyyymmdd keys in tables and files; day-of-week
// follows the 0=Monday .. 6=Sunday convention used everywhere in this repo.
// ---------------------------------------------------------------------------
struct Date {
    int year = 1970;
    int month = 1;
    int day = 1;

    int32_t key() const { return year * 10000 + month * 100 + day; }

    // days since 1970-01-01 (civil calendar)
    int64_t serial() const {
        int y = year - (month <= 2);
        const int era = (y >= 0 ? y : y - 399) / 400;
        const unsigned yoe = static_cast<unsigned>(y - era * 400);
        const unsigned doy =
            (153u * (static_cast<unsigned>(month) + (month > 2 ? -3 : 9)) + 2) / 5 +
            static_cast<unsigned>(day) - 1;
        const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
        return era * 146097LL + static_cast<int64_t>(doe) - 719468LL;
    }

    // 0 = Monday .. 6 = Sunday (1970-01-01 was a Thursday)
    int day_of_week() const {
        int64_t d = serial();
        return static_cast<int>(((d % 7) + 7 + 3) % 7);
    }

    Date plus_days(int n) const {
        int64_t z = serial() + n + 719468;
        const int64_t era = (z >= 0 ? z : z - 146096) / 146097;
        const unsigned doe = static_cast<unsigned>(z - era * 146097);
        const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
        const int64_t y = static_cast<int64_t>(yoe) + era * 400;
        const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
        const unsigned mp = (5 * doy + 2) / 153;
        const unsigned d = doy - (153 * mp + 2) / 5 + 1;
        const unsigned m = mp + (mp < 10 ? 3 : -9);
        return Date{static_cast<int>(y + (m <= 2)), static_cast<int>(m),
                    static_cast<int>(d)};
    }

    std::string to_string() const {
        char buf[16];
        std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d", year, month, day);
        return buf;
    }

    static Date parse(const std::string& s) {
        int y = 0, m = 0, d = 0;
        if (std::sscanf(s.c_str(), "%d-%d-%d", &y, &m, &d) != 3 || m < 1 ||
            m > 12 || d < 1 || d > 31)
            fail("format", "bad date '" + s + "' (expected YYYY-MM-DD)");
        return Date{y, m, d};
    }

    static Date from_key(int32_t k) {
        return Date{k / 10000, (k / 100) % 100, k % 100};
    }

    bool operator==(const Date& o) const = default;
};

// ---------------------------------------------------------------------------
// Deterministic RNG. std::mt19937_64 with hand-rolled transforms so the
// stream is identical across standard library implementations.
// ---------------------------------------------------------------------------
class Rng {
public:
    explicit Rng(uint64_t seed) : s_(seed ? seed : 0x9e3779b97f4a7c15ULL) {
        // splitmix64 warmup so nearby seeds diverge
        for (int i = 0; i < 4; ++i) next();
    }

    uint64_t next() {
        uint64_t z = (s_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    double uniform() {  // [0, 1)
        return static_cast<double>(next() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // inclusive bounds
    int uniform_int(int lo, int hi) {
        return lo + static_cast<int>(uniform() * (hi - lo + 1));
    }

    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = 0.0;
        while (u1 <= 1e-300) u1 = uniform();
        double u2 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 2.0 * M_PI * u2;
        spare_ = r * std::sin(a);
        has_spare_ = true;
        return r * std::cos(a);
    }

    template <class T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i)
            std::swap(v[i - 1], v[uniform_int(0, static_cast<int>(i) - 1)]);
    }

private:
    uint64_t s_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

inline uint64_t fnv1a64(const std::string& s) {
    uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

inline uint64_t mix_seed(uint64_t base, const std::string& tag) {
    return base ^ fnv1a64(tag);
}

// ---------------------------------------------------------------------------
// Versioned little-endian binary serialization used by models, tables and
// bundles.
// ---------------------------------------------------------------------------
class BinWriter {
public:
    void u8(uint8_t v) { buf_.push_back(v); }
    void u32(uint32_t v) {
        for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<uint8_t>(v >> (8 * i)));
    }
    void u64(uint64_t v) {
        for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<uint8_t>(v >> (8 * i)));
    }
    void i32(int32_t v) { u32(static_cast<uint32_t>(v)); }
    void i64(int64_t v) { u64(static_cast<uint64_t>(v)); }
    void f64(double v) {
        uint64_t bits;
        std::memcpy(&bits, &v, 8);
        u64(bits);
    }
    void str(const std::string& s) {
        u32(static_cast<uint32_t>(s.size()));
        buf_.insert(buf_.end(), s.begin(), s.end());
    }
    void magic(const char m[4]) { buf_.insert(buf_.end(), m, m + 4); }

    const std::vector<uint8_t>& bytes() const { return buf_; }
    std::vector<uint8_t> take() { return std::move(buf_); }

private:
    std::vector<uint8_t> buf_;
};

class BinReader {
public:
    explicit BinReader(std::span<const uint8_t> data) : data_(data) {}

    uint8_t u8() { return take(1)[0]; }
    uint32_t u32() {
        auto p = take(4);
        uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(p[i]) << (8 * i);
        return v;
    }
    uint64_t u64() {
        auto p = take(8);
        uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(p[i]) << (8 * i);
        return v;
    }
    int32_t i32() { return static_cast<int32_t>(u32()); }
    int64_t i64() { return static_cast<int64_t>(u64()); }
    double f64() {
        uint64_t bits = u64();
        double v;
        std::memcpy(&v, &bits, 8);
        return v;
    }
    std::string str() {
        uint32_t n = u32();
        auto p = take(n);
        return std::string(reinterpret_cast<const char*>(p.data()), n);
    }
    void expect_magic(const char m[4]) {
        auto p = take(4);
        if (std::memcmp(p.data(), m, 4) != 0)
            fail("format", "bad magic in serialized payload");
    }
    bool done() const { return pos_ == data_.size(); }

private:
    std::span<const uint8_t> take(size_t n) {
        if (pos_ + n > data_.size())
            fail("format", "truncated serialized payload");
        auto s = data_.subspan(pos_, n);
        pos_ += n;
        return s;
    }

    std::span<const uint8_t> data_;
    size_t pos_ = 0;
};

}  // namespace tse
