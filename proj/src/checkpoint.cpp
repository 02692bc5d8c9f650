#include "hoi/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "hoi/errors.hpp"
#include "hoi/rng.hpp"

namespace hoi {

namespace {

constexpr const char* kMagic = "hoi-checkpoint v1";

struct ManifestEntry {
    std::string name;
    Shape shape;
    int64_t offset = 0;  // in doubles
};

std::string shape_str(const Shape& s) {
    std::string out = "[";
    for (size_t i = 0; i < s.size(); ++i) {
        if (i) out += "x";
        out += std::to_string(s[i]);
    }
    return out + "]";
}

void put_le64(std::ostream& os, uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    os.write(reinterpret_cast<const char*>(b), 8);
}

uint64_t get_le64(const unsigned char* b) {
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(b[i]) << (8 * i);
    return v;
}

}  // namespace

void save_checkpoint(const ModelParams& params, const std::string& path) {
    const std::vector<NamedParam> named = named_parameters(params);
    std::ofstream os(path, std::ios::binary);
    if (!os) throw ParameterError("checkpoint: cannot open for writing: " + path);

    int64_t total = 0;
    for (const auto& p : named) total += p.tensor.numel();

    os << kMagic << "\n";
    os << "params " << named.size() << "\n";
    os << "doubles " << total << "\n";
    int64_t offset = 0;
    for (const auto& p : named) {
        os << p.name << " " << p.tensor.rank();
        for (const int d : p.tensor.shape()) os << " " << d;
        os << " " << offset << "\n";
        offset += p.tensor.numel();
    }
    os << "end\n";
    for (const auto& p : named) {
        for (const double x : p.tensor.data()) {
            uint64_t bits;
            std::memcpy(&bits, &x, sizeof bits);
            put_le64(os, bits);
        }
    }
    if (!os) throw ParameterError("checkpoint: write failed: " + path);
}

ModelParams load_checkpoint(const std::string& path, const RunConfig& cfg) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw ParameterError("checkpoint: cannot open: " + path);

    std::string line;
    if (!std::getline(is, line) || line != kMagic)
        throw CorruptionError("checkpoint: bad magic line in " + path);

    size_t n_params = 0;
    int64_t total = 0;
    if (!std::getline(is, line) || std::sscanf(line.c_str(), "params %zu", &n_params) != 1)
        throw CorruptionError("checkpoint: missing params count");
    if (!std::getline(is, line) ||
        std::sscanf(line.c_str(), "doubles %lld", reinterpret_cast<long long*>(&total)) != 1)
        throw CorruptionError("checkpoint: missing doubles count");

    std::vector<ManifestEntry> manifest;
    manifest.reserve(n_params);
    int64_t expect_offset = 0;
    for (size_t i = 0; i < n_params; ++i) {
        if (!std::getline(is, line))
            throw CorruptionError("checkpoint: manifest truncated at entry " + std::to_string(i));
        std::istringstream ls(line);
        ManifestEntry e;
        int rank = 0;
        if (!(ls >> e.name >> rank) || rank < 0 || rank > 8)
            throw CorruptionError("checkpoint: garbled manifest entry " + std::to_string(i));
        e.shape.resize(static_cast<size_t>(rank));
        for (int d = 0; d < rank; ++d)
            if (!(ls >> e.shape[static_cast<size_t>(d)]) || e.shape[static_cast<size_t>(d)] <= 0)
                throw CorruptionError("checkpoint: garbled shape in entry " + e.name);
        if (!(ls >> e.offset)) throw CorruptionError("checkpoint: missing offset in entry " + e.name);
        if (e.offset != expect_offset)
            throw CorruptionError("checkpoint: non-contiguous offset for " + e.name);
        expect_offset += shape_numel(e.shape);
        manifest.push_back(std::move(e));
    }
    if (expect_offset != total)
        throw CorruptionError("checkpoint: manifest covers " + std::to_string(expect_offset) +
                              " doubles but header declares " + std::to_string(total));
    if (!std::getline(is, line) || line != "end")
        throw CorruptionError("checkpoint: missing end-of-manifest marker");

    std::vector<unsigned char> raw(static_cast<size_t>(total) * 8);
    is.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (static_cast<int64_t>(is.gcount()) != static_cast<int64_t>(raw.size()))
        throw CorruptionError("checkpoint: blob holds " + std::to_string(is.gcount() / 8) +
                              " doubles, manifest expects " + std::to_string(total));
    char extra;
    if (is.read(&extra, 1) && is.gcount() == 1)
        throw CorruptionError("checkpoint: trailing bytes after blob");

    validate_config(cfg);
    Rng rng(0);  // layout only; every value is overwritten below
    ModelParams params = make_model_params(cfg, rng);
    const std::vector<NamedParam> named = named_parameters(params);

    std::string mismatches;
    const size_t common = std::min(named.size(), manifest.size());
    for (size_t i = 0; i < common; ++i) {
        if (named[i].name != manifest[i].name)
            mismatches += " " + manifest[i].name + " (expected " + named[i].name + ")";
        else if (named[i].tensor.shape() != manifest[i].shape)
            mismatches += " " + manifest[i].name + " (shape " + shape_str(manifest[i].shape) +
                          ", expected " + shape_str(named[i].tensor.shape()) + ")";
    }
    for (size_t i = common; i < manifest.size(); ++i) mismatches += " " + manifest[i].name + " (extra)";
    for (size_t i = common; i < named.size(); ++i) mismatches += " " + named[i].name + " (missing)";
    if (!mismatches.empty())
        throw CompatibilityError("checkpoint: incompatible with config:" + mismatches);

    for (size_t i = 0; i < named.size(); ++i) {
        const int64_t n = shape_numel(manifest[i].shape);
        std::vector<double> values(static_cast<size_t>(n));
        const unsigned char* base = raw.data() + static_cast<size_t>(manifest[i].offset) * 8;
        for (int64_t k = 0; k < n; ++k) {
            const uint64_t bits = get_le64(base + static_cast<size_t>(k) * 8);
            std::memcpy(&values[static_cast<size_t>(k)], &bits, sizeof(double));
        }
        named[i].tensor.set_data(std::move(values));
    }
    return params;
}

}  // namespace hoi
