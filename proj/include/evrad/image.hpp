// SPDX-License-Identifier: Apache-2.0
//
// Row-major interleaved image container. Rendering and metrics run in double
// precision; images persist in single precision (PFM) or bytes (PPM).
#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

namespace evrad {

template <typename T>
struct Image {
    int width = 0, height = 0, channels = 0;
    std::vector<T> data;

    Image() = default;
    Image(int w, int h, int c) : width(w), height(h), channels(c), data(size_t(w) * h * c, T(0)) {
        if (w <= 0 || h <= 0 || c <= 0) throw std::invalid_argument("Image: non-positive shape");
    }

    T& at(int y, int x, int c) { return data[(size_t(y) * width + x) * channels + c]; }
    T at(int y, int x, int c) const { return data[(size_t(y) * width + x) * channels + c]; }

    bool same_shape(const Image& o) const {
        return width == o.width && height == o.height && channels == o.channels;
    }
};

using Imagef = Image<float>;
using Imageb = Image<std::uint8_t>;

template <typename From, typename To>
Image<To> convert_image(const Image<From>& src) {
    Image<To> out(src.width, src.height, src.channels);
    for (size_t i = 0; i < src.data.size(); ++i) out.data[i] = To(src.data[i]);
    return out;
}

} // namespace evrad
