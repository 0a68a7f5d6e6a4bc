#pragma once

#include "tracespatial/geometry.hpp"

#include <cstdint>
#include <numeric>
#include <vector>

namespace tracespatial {

TRACESPATIAL_ERROR(EmptyMask);

/// Binary image mask, run-length encoded over row-major pixels.
/// `counts` alternates zero-runs and one-runs and always starts with a
/// zero-run (possibly of length 0).
class RleMask {
public:
    RleMask() = default;

    RleMask(int height, int width, std::vector<std::uint32_t> counts)
        : height_(height), width_(width), counts_(std::move(counts))
    {
        if (height < 0 || width < 0) throw InvalidInput("negative mask size");
        const std::uint64_t total = std::accumulate(counts_.begin(), counts_.end(), std::uint64_t{0});
        if (total != static_cast<std::uint64_t>(height) * static_cast<std::uint64_t>(width))
            throw InvalidInput("RLE counts sum to " + std::to_string(total) + ", expected " +
                               std::to_string(static_cast<std::uint64_t>(height) * width));
    }

    static RleMask encode(int height, int width, const std::vector<std::uint8_t>& bits)
    {
        if (bits.size() != static_cast<std::size_t>(height) * static_cast<std::size_t>(width))
            throw InvalidInput("mask bitmap size mismatch");
        std::vector<std::uint32_t> counts;
        std::uint8_t current = 0;
        std::uint32_t run = 0;
        for (std::uint8_t b : bits) {
            const std::uint8_t v = b ? 1 : 0;
            if (v != current) {
                counts.push_back(run);
                run = 0;
                current = v;
            }
            ++run;
        }
        counts.push_back(run);
        return RleMask(height, width, std::move(counts));
    }

    std::vector<std::uint8_t> decode() const
    {
        std::vector<std::uint8_t> bits(static_cast<std::size_t>(height_) * width_, 0);
        std::size_t pos = 0;
        for (std::size_t i = 0; i < counts_.size(); ++i) {
            if (i % 2 == 1) std::fill_n(bits.begin() + static_cast<std::ptrdiff_t>(pos), counts_[i], 1);
            pos += counts_[i];
        }
        return bits;
    }

    int height() const { return height_; }
    int width() const { return width_; }
    const std::vector<std::uint32_t>& counts() const { return counts_; }

    std::size_t area() const
    {
        std::size_t a = 0;
        for (std::size_t i = 1; i < counts_.size(); i += 2) a += counts_[i];
        return a;
    }
    bool empty() const { return area() == 0; }

    /// Pixel lookup; pixel (x, y) is column x, row y. Out of range reads as 0.
    bool at(int x, int y) const
    {
        if (x < 0 || y < 0 || x >= width_ || y >= height_) return false;
        const std::size_t target = static_cast<std::size_t>(y) * width_ + x;
        std::size_t pos = 0;
        for (std::size_t i = 0; i < counts_.size(); ++i) {
            pos += counts_[i];
            if (target < pos) return i % 2 == 1;
        }
        return false;
    }

    /// Centroid (x, y) of the largest 4-connected component, in pixel-index
    /// coordinates: a w-wide run starting at column x0 has centroid x0 + (w-1)/2.
    /// Ties between equal-size components go to the one found first in
    /// row-major order.
    Vec2 largest_component_centroid() const
    {
        const auto bits = decode();
        std::vector<int> label(bits.size(), -1);
        std::vector<int> stack;
        std::size_t best_size = 0;
        Vec2 best_centroid = Vec2::Zero();
        int next_label = 0;
        for (std::size_t seed = 0; seed < bits.size(); ++seed) {
            if (!bits[seed] || label[seed] >= 0) continue;
            const int id = next_label++;
            std::size_t size = 0;
            double sx = 0.0, sy = 0.0;
            stack.assign(1, static_cast<int>(seed));
            label[seed] = id;
            while (!stack.empty()) {
                const int p = stack.back();
                stack.pop_back();
                const int x = p % width_;
                const int y = p / width_;
                ++size;
                sx += x;
                sy += y;
                const int nx[4] = {x - 1, x + 1, x, x};
                const int ny[4] = {y, y, y - 1, y + 1};
                for (int k = 0; k < 4; ++k) {
                    if (nx[k] < 0 || ny[k] < 0 || nx[k] >= width_ || ny[k] >= height_) continue;
                    const int q = ny[k] * width_ + nx[k];
                    if (bits[q] && label[q] < 0) {
                        label[q] = id;
                        stack.push_back(q);
                    }
                }
            }
            if (size > best_size) {
                best_size = size;
                best_centroid = Vec2(sx / size, sy / size);
            }
        }
        if (best_size == 0) throw EmptyMask("mask has no foreground pixels");
        return best_centroid;
    }

private:
    int height_ = 0;
    int width_ = 0;
    std::vector<std::uint32_t> counts_;
};

}  // namespace tracespatial
