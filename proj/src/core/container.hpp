#ifndef E2I_CORE_CONTAINER_HPP
#define E2I_CORE_CONTAINER_HPP

#include <map>
#include <string>
#include <vector>

#include "tensor.hpp"

namespace e2i {

// Directory container: manifest.json plus one raw binary file per array,
// 32-bit little-endian floats in C order. Used for datasets and checkpoints.
struct Container {
    int version = 1;
    // Insertion-ordered so save/load round-trips the manifest byte-for-byte.
    std::vector<std::pair<std::string, TensorF>> arrays;
    std::map<std::string, std::string> metadata;

    TensorF& add(const std::string& name, TensorF t);
    const TensorF* find(const std::string& name) const;
    const TensorF& get(const std::string& name) const;
    bool has(const std::string& name) const { return find(name) != nullptr; }
};

void save_container(const Container& c, const std::string& root);
Container load_container(const std::string& root);

// Writes to a sibling temp directory, then renames into place, so a crash
// mid-write never leaves a half-written checkpoint at root.
void save_container_atomic(const Container& c, const std::string& root);

}  // namespace e2i

#endif
