#ifndef E2I_CORE_PNG_HPP
#define E2I_CORE_PNG_HPP

#include <cstdint>
#include <string>
#include <vector>

namespace e2i {

// Minimal 8-bit RGB PNG writer (zlib-compressed, no interlace, no palette).
void write_png_rgb8(const std::string& path, int width, int height,
                    const std::vector<uint8_t>& rgb);

}  // namespace e2i

#endif
