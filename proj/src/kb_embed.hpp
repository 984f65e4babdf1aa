#pragma once

#include <cstddef>
#include <string_view>

namespace nppx::detail {

struct EmbeddedFile {
    std::string_view name;
    std::string_view text;
};

extern const EmbeddedFile kEmbeddedKb[];
extern const std::size_t kEmbeddedKbCount;

}  // namespace nppx::detail
