#include "container.hpp"

#include <json.hpp>

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "common.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace e2i {

static_assert(std::endian::native == std::endian::little,
              "raw array files are little-endian; add byte swapping for this host");

TensorF& Container::add(const std::string& name, TensorF t) {
    require(find(name) == nullptr, Status::integrity, "duplicate array name: " + name);
    arrays.emplace_back(name, std::move(t));
    return arrays.back().second;
}

const TensorF* Container::find(const std::string& name) const {
    for (const auto& [n, t] : arrays) {
        if (n == name) return &t;
    }
    return nullptr;
}

const TensorF& Container::get(const std::string& name) const {
    const TensorF* t = find(name);
    require(t != nullptr, Status::format, "container is missing array: " + name);
    return *t;
}

void save_container(const Container& c, const std::string& root) {
    std::error_code ec;
    fs::create_directories(root, ec);
    require(!ec, Status::io, "cannot create directory " + root + ": " + ec.message());

    json manifest;
    manifest["version"] = c.version;
    manifest["arrays"] = json::array();
    for (const auto& [name, t] : c.arrays) {
        const std::string rel = name + ".f32";
        manifest["arrays"].push_back({{"name", name},
                                      {"dtype", "f32"},
                                      {"shape", t.shape},
                                      {"path", rel},
                                      {"byte_order", "little"}});
        const fs::path p = fs::path(root) / rel;
        std::ofstream f(p, std::ios::binary | std::ios::trunc);
        require(f.good(), Status::io, "cannot open " + p.string() + " for writing");
        f.write(reinterpret_cast<const char*>(t.ptr()),
                static_cast<std::streamsize>(t.numel() * sizeof(float)));
        require(f.good(), Status::io, "write failed: " + p.string());
    }
    manifest["metadata"] = c.metadata;

    const fs::path mp = fs::path(root) / "manifest.json";
    std::ofstream mf(mp, std::ios::binary | std::ios::trunc);
    require(mf.good(), Status::io, "cannot open " + mp.string() + " for writing");
    mf << manifest.dump(2) << "\n";
    require(mf.good(), Status::io, "write failed: " + mp.string());
}

void save_container_atomic(const Container& c, const std::string& root) {
    const fs::path target(root);
    const fs::path tmp = target.parent_path().empty()
                             ? fs::path(root + ".tmp")
                             : target.parent_path() / (target.filename().string() + ".tmp");
    std::error_code ec;
    fs::remove_all(tmp, ec);
    save_container(c, tmp.string());
    fs::remove_all(target, ec);
    fs::rename(tmp, target, ec);
    require(!ec, Status::io, "cannot move checkpoint into place at " + root + ": " + ec.message());
}

Container load_container(const std::string& root) {
    std::error_code direc;
    require(fs::is_directory(root, direc), Status::io, "cannot open " + root);
    const fs::path mp = fs::path(root) / "manifest.json";
    std::ifstream mf(mp, std::ios::binary);
    require(mf.good(), Status::format, "missing manifest: " + mp.string());

    json manifest;
    try {
        manifest = json::parse(mf);
    } catch (const json::exception& e) {
        fail(Status::format, "corrupt manifest " + mp.string() + ": " + e.what());
    }

    Container c;
    try {
        c.version = manifest.at("version").get<int>();
        if (manifest.contains("metadata")) {
            c.metadata = manifest.at("metadata").get<std::map<std::string, std::string>>();
        }
        for (const auto& a : manifest.at("arrays")) {
            const auto name = a.at("name").get<std::string>();
            const auto dtype = a.at("dtype").get<std::string>();
            require(dtype == "f32", Status::unsupported, "unsupported dtype '" + dtype +
                                                             "' for array " + name);
            if (a.contains("byte_order")) {
                const auto bo = a.at("byte_order").get<std::string>();
                require(bo == "little", Status::unsupported,
                        "unsupported byte order '" + bo + "' for array " + name);
            }
            const auto shape = a.at("shape").get<std::vector<int64_t>>();
            for (int64_t d : shape) {
                require(d >= 0, Status::format, "negative dimension in array " + name);
            }
            const auto rel = a.at("path").get<std::string>();
            const fs::path p = fs::path(root) / rel;

            std::error_code ec;
            const auto bytes = fs::file_size(p, ec);
            require(!ec, Status::integrity, "missing array file: " + p.string());
            TensorF t(shape);
            const uint64_t expected = static_cast<uint64_t>(t.numel()) * sizeof(float);
            if (bytes != expected) {
                fail(Status::integrity, "array " + name + ": file has " + std::to_string(bytes) +
                                            " bytes, manifest shape " + t.shape_str() +
                                            " needs " + std::to_string(expected));
            }
            std::ifstream f(p, std::ios::binary);
            require(f.good(), Status::io, "cannot open " + p.string());
            f.read(reinterpret_cast<char*>(t.ptr()), static_cast<std::streamsize>(expected));
            require(f.good() || expected == 0, Status::io, "read failed: " + p.string());
            c.add(name, std::move(t));
        }
    } catch (const json::exception& e) {
        fail(Status::format, "malformed manifest " + mp.string() + ": " + e.what());
    }
    return c;
}

}  // namespace e2i
