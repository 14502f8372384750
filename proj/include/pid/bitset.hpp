#pragma once

#include <bit>
#include <cstddef>
#include <cstdint>
#include <vector>

namespace pid {

// Fixed-width dynamic bitset used for reachability sets. Width is set at
// construction; all binary operations assume equal widths.
class Bitset {
public:
    Bitset() = default;
    explicit Bitset(std::size_t bits) : bits_(bits), words_((bits + 63) / 64, 0) {}

    std::size_t size() const noexcept { return bits_; }

    bool test(std::size_t i) const noexcept { return (words_[i >> 6] >> (i & 63)) & 1u; }
    void set(std::size_t i) noexcept { words_[i >> 6] |= std::uint64_t{1} << (i & 63); }

    bool any() const noexcept {
        for (auto w : words_)
            if (w != 0) return true;
        return false;
    }
    bool none() const noexcept { return !any(); }

    std::size_t count() const noexcept {
        std::size_t n = 0;
        for (auto w : words_) n += static_cast<std::size_t>(std::popcount(w));
        return n;
    }

    // this |= other; returns true when at least one bit was newly set.
    bool merge(const Bitset& other) noexcept {
        bool grew = false;
        for (std::size_t k = 0; k < words_.size(); ++k) {
            const std::uint64_t fresh = other.words_[k] & ~words_[k];
            if (fresh != 0) {
                words_[k] |= fresh;
                grew = true;
            }
        }
        return grew;
    }

    // Bits set in this but not in `base`.
    Bitset minus(const Bitset& base) const {
        Bitset out(bits_);
        for (std::size_t k = 0; k < words_.size(); ++k) out.words_[k] = words_[k] & ~base.words_[k];
        return out;
    }

    template <class Fn>
    void for_each(Fn&& fn) const {
        for (std::size_t k = 0; k < words_.size(); ++k) {
            std::uint64_t w = words_[k];
            while (w != 0) {
                const int b = std::countr_zero(w);
                fn(k * 64 + static_cast<std::size_t>(b));
                w &= w - 1;
            }
        }
    }

    std::vector<std::uint32_t> indices() const {
        std::vector<std::uint32_t> out;
        out.reserve(count());
        for_each([&](std::size_t i) { out.push_back(static_cast<std::uint32_t>(i)); });
        return out;
    }

    friend bool operator==(const Bitset&, const Bitset&) = default;

private:
    std::size_t bits_ = 0;
    std::vector<std::uint64_t> words_;
};

}  // namespace pid
