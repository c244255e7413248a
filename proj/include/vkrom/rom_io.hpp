#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "vkrom/errors.hpp"
#include "vkrom/rom.hpp"

namespace vkrom {

/// Versioned binary container for offline data.
///
/// Layout (little endian):
///   8 bytes  magic "VKROM\0\0\1"
///   u32      format version
///   u32      entry count
///   per entry: u32 name length, name bytes, u32 rank, rank x u64 extents, u64 payload offset
///   payload: row-major float64 arrays, offsets relative to the payload start
struct RomArray {
    std::vector<std::uint64_t> shape;
    std::vector<double> data;
};

class RomArchive {
public:
    static constexpr std::array<char, 8> kMagic{'V', 'K', 'R', 'O', 'M', '\0', '\0', '\1'};
    static constexpr std::uint32_t kVersion = 1;

    void put(const std::string& name, std::vector<std::uint64_t> shape, std::vector<double> data)
    {
        std::uint64_t count = 1;
        for (auto e : shape) {
            count *= e;
        }
        if (count != data.size()) {
            throw InvalidArgument("RomArchive: shape of '" + name + "' does not match its data");
        }
        arrays_[name] = {std::move(shape), std::move(data)};
    }

    void put_matrix(const std::string& name, const DenseMatrix& m)
    {
        std::vector<double> data(static_cast<std::size_t>(m.size()));
        for (Eigen::Index i = 0; i < m.rows(); ++i) {
            for (Eigen::Index j = 0; j < m.cols(); ++j) {
                data[static_cast<std::size_t>(i * m.cols() + j)] = m(i, j);
            }
        }
        put(name, {static_cast<std::uint64_t>(m.rows()), static_cast<std::uint64_t>(m.cols())}, std::move(data));
    }

    [[nodiscard]] bool contains(const std::string& name) const { return arrays_.count(name) != 0; }

    [[nodiscard]] const RomArray& get(const std::string& name) const
    {
        const auto it = arrays_.find(name);
        if (it == arrays_.end()) {
            throw InvalidArgument("RomArchive: missing entry '" + name + "'");
        }
        return it->second;
    }

    [[nodiscard]] DenseMatrix matrix(const std::string& name) const
    {
        const RomArray& a = get(name);
        if (a.shape.size() != 2) {
            throw InvalidArgument("RomArchive: entry '" + name + "' is not a matrix");
        }
        const auto rows = static_cast<Eigen::Index>(a.shape[0]);
        const auto cols = static_cast<Eigen::Index>(a.shape[1]);
        DenseMatrix m(rows, cols);
        for (Eigen::Index i = 0; i < rows; ++i) {
            for (Eigen::Index j = 0; j < cols; ++j) {
                m(i, j) = a.data[static_cast<std::size_t>(i * cols + j)];
            }
        }
        return m;
    }

    [[nodiscard]] const std::map<std::string, RomArray>& entries() const { return arrays_; }

    void save(const std::string& path) const
    {
        static_assert(std::endian::native == std::endian::little, "container writer assumes a little-endian host");
        std::ofstream out(path, std::ios::binary);
        if (!out) {
            throw InvalidArgument("RomArchive: cannot open '" + path + "' for writing");
        }
        out.write(kMagic.data(), kMagic.size());
        write_pod(out, kVersion);
        write_pod(out, static_cast<std::uint32_t>(arrays_.size()));
        std::uint64_t offset = 0;
        for (const auto& [name, a] : arrays_) {
            write_pod(out, static_cast<std::uint32_t>(name.size()));
            out.write(name.data(), static_cast<std::streamsize>(name.size()));
            write_pod(out, static_cast<std::uint32_t>(a.shape.size()));
            for (auto e : a.shape) {
                write_pod(out, e);
            }
            write_pod(out, offset);
            offset += a.data.size() * sizeof(double);
        }
        for (const auto& [name, a] : arrays_) {
            out.write(reinterpret_cast<const char*>(a.data.data()),
                      static_cast<std::streamsize>(a.data.size() * sizeof(double)));
        }
        if (!out) {
            throw InvalidArgument("RomArchive: write to '" + path + "' failed");
        }
    }

    static RomArchive load(const std::string& path)
    {
        std::ifstream in(path, std::ios::binary);
        if (!in) {
            throw InvalidArgument("RomArchive: cannot open '" + path + "'");
        }
        std::array<char, 8> magic{};
        in.read(magic.data(), magic.size());
        if (!in || magic != kMagic) {
            throw InvalidArgument("RomArchive: '" + path + "' is not a basis container");
        }
        const auto version = read_pod<std::uint32_t>(in);
        if (version != kVersion) {
            throw InvalidArgument("RomArchive: unsupported container version " + std::to_string(version));
        }
        const auto count = read_pod<std::uint32_t>(in);
        struct Index {
            std::string name;
            std::vector<std::uint64_t> shape;
            std::uint64_t offset;
        };
        std::vector<Index> index;
        for (std::uint32_t k = 0; k < count; ++k) {
            Index e;
            e.name.resize(read_pod<std::uint32_t>(in));
            in.read(e.name.data(), static_cast<std::streamsize>(e.name.size()));
            e.shape.resize(read_pod<std::uint32_t>(in));
            for (auto& s : e.shape) {
                s = read_pod<std::uint64_t>(in);
            }
            e.offset = read_pod<std::uint64_t>(in);
            index.push_back(std::move(e));
        }
        const std::streamoff payload = in.tellg();
        RomArchive archive;
        for (auto& e : index) {
            std::uint64_t n = 1;
            for (auto s : e.shape) {
                n *= s;
            }
            std::vector<double> data(n);
            in.seekg(payload + static_cast<std::streamoff>(e.offset));
            in.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(n * sizeof(double)));
            if (!in) {
                throw InvalidArgument("RomArchive: truncated payload for '" + e.name + "'");
            }
            archive.arrays_[e.name] = {std::move(e.shape), std::move(data)};
        }
        return archive;
    }

private:
    template <class T>
    static void write_pod(std::ofstream& out, T v)
    {
        out.write(reinterpret_cast<const char*>(&v), sizeof(T));
    }

    template <class T>
    static T read_pod(std::ifstream& in)
    {
        T v{};
        in.read(reinterpret_cast<char*>(&v), sizeof(T));
        if (!in) {
            throw InvalidArgument("RomArchive: truncated header");
        }
        return v;
    }

    std::map<std::string, RomArray> arrays_;
};

/// Mesh parameters needed to rebuild the full-order space next to a basis.
struct RomMeshInfo {
    double length = 1.0;
    int nx = 0;
    int ny = 0;
    int degree = 2;
};

namespace detail {

inline const std::array<const char*, 4> rom_field_keys{"u", "U", "phi", "Phi"};

inline void put_tensor(RomArchive& ar, const std::string& name, const std::vector<DenseMatrix>& t)
{
    const auto n = static_cast<std::uint64_t>(t.size());
    std::vector<double> data;
    data.reserve(n * n * n);
    for (const auto& m : t) {
        for (Eigen::Index i = 0; i < m.rows(); ++i) {
            for (Eigen::Index j = 0; j < m.cols(); ++j) {
                data.push_back(m(i, j));
            }
        }
    }
    ar.put(name, {n, n, n}, std::move(data));
}

inline std::vector<DenseMatrix> get_tensor(const RomArchive& ar, const std::string& name, int n)
{
    const RomArray& a = ar.get(name);
    const auto un = static_cast<std::uint64_t>(n);
    if (a.shape != std::vector<std::uint64_t>{un, un, un}) {
        throw InvalidArgument("RomArchive: tensor '" + name + "' has the wrong shape");
    }
    std::vector<DenseMatrix> t(static_cast<std::size_t>(n), DenseMatrix(n, n));
    std::size_t k = 0;
    for (auto& m : t) {
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < n; ++j) {
                m(i, j) = a.data[k++];
            }
        }
    }
    return t;
}

} // namespace detail

inline void save_rom(const std::string& path, const RomMeshInfo& mesh, const ReducedBasis& basis,
                     const ReducedOperators& reduced)
{
    RomArchive ar;
    ar.put("mesh", {4}, {mesh.length, double(mesh.nx), double(mesh.ny), double(mesh.degree)});
    ar.put("N", {1}, {double(basis.N)});
    for (int f = 0; f < 4; ++f) {
        const std::string key = detail::rom_field_keys[f];
        ar.put_matrix("basis/" + key, basis.bases[f]);
        ar.put("energy/" + key, {basis.energies[f].size()}, basis.energies[f]);
    }
    ar.put_matrix("op/a_uu", reduced.a_uu);
    ar.put_matrix("op/b_uU", reduced.b_uU);
    ar.put_matrix("op/a_UU", reduced.a_UU);
    ar.put_matrix("op/d0_Uu", reduced.d0_Uu);
    ar.put_matrix("op/d1_Uu", reduced.d1_Uu);
    ar.put_matrix("op/a_pp", reduced.a_pp);
    ar.put_matrix("op/b_pP", reduced.b_pP);
    ar.put_matrix("op/a_PP", reduced.a_PP);
    detail::put_tensor(ar, "op/t_phi", reduced.t_phi);
    detail::put_tensor(ar, "op/t_u", reduced.t_u);
    ar.save(path);
}

inline RomMeshInfo load_rom_mesh(const RomArchive& ar)
{
    const auto& m = ar.get("mesh").data;
    if (m.size() != 4) {
        throw InvalidArgument("RomArchive: malformed mesh entry");
    }
    return {m[0], static_cast<int>(m[1]), static_cast<int>(m[2]), static_cast<int>(m[3])};
}

/// Online data only; nothing here scales with the full-order dof count.
inline ReducedOperators load_reduced_operators(const RomArchive& ar)
{
    ReducedOperators r;
    r.N = static_cast<int>(ar.get("N").data.at(0));
    r.a_uu = ar.matrix("op/a_uu");
    r.b_uU = ar.matrix("op/b_uU");
    r.a_UU = ar.matrix("op/a_UU");
    r.d0_Uu = ar.matrix("op/d0_Uu");
    r.d1_Uu = ar.matrix("op/d1_Uu");
    r.a_pp = ar.matrix("op/a_pp");
    r.b_pP = ar.matrix("op/b_pP");
    r.a_PP = ar.matrix("op/a_PP");
    r.t_phi = detail::get_tensor(ar, "op/t_phi", r.N);
    r.t_u = detail::get_tensor(ar, "op/t_u", r.N);
    return r;
}

inline ReducedBasis load_basis(const RomArchive& ar, const SpacePtr& space)
{
    ReducedBasis b;
    b.space = space;
    b.N = static_cast<int>(ar.get("N").data.at(0));
    for (int f = 0; f < 4; ++f) {
        const std::string key = detail::rom_field_keys[f];
        b.bases[f] = ar.matrix("basis/" + key);
        if (b.bases[f].rows() != space->num_interior() || b.bases[f].cols() != b.N) {
            throw InvalidArgument("RomArchive: basis '" + key + "' does not fit the space");
        }
        b.energies[f] = ar.get("energy/" + key).data;
    }
    return b;
}

} // namespace vkrom
