#pragma once

#include <cassert>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace wsseg {

/// Channel-planar raster: element (ch, row, col) lives at
/// `(ch * height + row) * width + col`.
template <typename T>
class Raster {
 public:
  using value_type = T;

  Raster() = default;
  Raster(int height, int width, int channels = 1, T fill = T{})
      : height_(height),
        width_(width),
        channels_(channels),
        data_(static_cast<std::size_t>(height) * width * channels, fill) {}

  int height() const noexcept { return height_; }
  int width() const noexcept { return width_; }
  int channels() const noexcept { return channels_; }
  std::size_t plane_size() const noexcept {
    return static_cast<std::size_t>(height_) * width_;
  }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  bool in_bounds(int row, int col) const noexcept {
    return row >= 0 && col >= 0 && row < height_ && col < width_;
  }
  bool same_shape(const Raster& other) const noexcept {
    return height_ == other.height_ && width_ == other.width_ &&
           channels_ == other.channels_;
  }
  template <typename U>
  bool same_extent(const Raster<U>& other) const noexcept {
    return height_ == other.height() && width_ == other.width();
  }

  T& operator()(int row, int col, int ch = 0) noexcept {
    assert(in_bounds(row, col) && ch >= 0 && ch < channels_);
    return data_[(static_cast<std::size_t>(ch) * height_ + row) * width_ + col];
  }
  const T& operator()(int row, int col, int ch = 0) const noexcept {
    assert(in_bounds(row, col) && ch >= 0 && ch < channels_);
    return data_[(static_cast<std::size_t>(ch) * height_ + row) * width_ + col];
  }

  std::span<T> plane(int ch) noexcept {
    return {data_.data() + ch * plane_size(), plane_size()};
  }
  std::span<const T> plane(int ch) const noexcept {
    return {data_.data() + ch * plane_size(), plane_size()};
  }

  std::vector<T>& data() noexcept { return data_; }
  const std::vector<T>& data() const noexcept { return data_; }

  friend bool operator==(const Raster& a, const Raster& b) {
    return a.same_shape(b) && a.data_ == b.data_;
  }

 private:
  int height_ = 0;
  int width_ = 0;
  int channels_ = 0;
  std::vector<T> data_;
};

struct Pixel {
  int row = 0;
  int col = 0;
  friend bool operator==(const Pixel&, const Pixel&) = default;
  friend auto operator<=>(const Pixel&, const Pixel&) = default;
};

}  // namespace wsseg
