#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace hallulens {

// Seeded RNG with platform-independent derived draws. std::uniform_int_distribution
// is implementation-defined, so bounded draws are done by hand to keep artifacts
// byte-identical across toolchains.
class SeededRng {
public:
    explicit SeededRng(std::uint64_t seed) : state_(seed ? seed : 0x9e3779b97f4a7c15ULL) {}

    std::uint64_t next_u64() {
        // splitmix64
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // Uniform in [0, n). n must be > 0.
    std::uint64_t uniform(std::uint64_t n) {
        if (n == 0) throw std::invalid_argument("SeededRng::uniform: n == 0");
        std::uint64_t threshold = (0 - n) % n;  // rejection sampling, unbiased
        for (;;) {
            std::uint64_t r = next_u64();
            if (r >= threshold) return r % n;
        }
    }

    double next_double() {  // [0, 1)
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(uniform(i));
            std::swap(v[i - 1], v[j]);
        }
    }

    template <typename T>
    std::vector<T> sample(const std::vector<T>& v, std::size_t k) {
        if (k > v.size()) throw std::invalid_argument("SeededRng::sample: k > population");
        std::vector<T> pool = v;
        shuffle(pool);
        pool.resize(k);
        return pool;
    }

private:
    std::uint64_t state_;
};

std::uint64_t fnv1a64(std::string_view data, std::uint64_t seed = 0xcbf29ce484222325ULL);

// Trial seed derivation: hash(master_seed, task, trial_index). Documented in README.
std::uint64_t derive_seed(std::uint64_t master_seed, std::string_view task, std::uint64_t trial);

std::string sha256_hex(std::string_view data);
std::string sha256_file_hex(const std::filesystem::path& path);

// ---- string helpers ----
std::string trim(std::string_view s);
std::string to_lower(std::string_view s);
bool iequals(std::string_view a, std::string_view b);
bool icontains(std::string_view haystack, std::string_view needle);
std::vector<std::string> split(std::string_view s, char sep);
std::string join(const std::vector<std::string>& parts, std::string_view sep);
// Lowercase and collapse runs of whitespace to single spaces.
std::string normalize_name(std::string_view s);

// ---- file helpers ----
std::string read_file(const std::filesystem::path& path);
void write_file_atomic(const std::filesystem::path& path, std::string_view content);
std::vector<std::string> read_lines(const std::filesystem::path& path);

// Runs fn(i) for i in [0, n) on up to `workers` threads, preserving index order
// of results. Exceptions from fn propagate after all workers join.
void parallel_for_indexed(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& fn);

}  // namespace hallulens
