#include "tracs/parameters.hpp"

#include <bit>
#include <cstring>
#include <istream>
#include <ostream>

#include "tracs/errors.hpp"

namespace tracs {
namespace {

constexpr char kMagic[8] = {'T', 'R', 'A', 'C', 'S', 'P', 'R', 'M'};

static_assert(std::endian::native == std::endian::little,
              "parameter files are little-endian; add byte swapping for this platform");

template <typename T>
void put(std::ostream& out, T v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T get(std::istream& in, const std::string& where) {
    T v{};
    if (!in.read(reinterpret_cast<char*>(&v), sizeof v)) throw SchemaError(where + ": truncated");
    return v;
}

}  // namespace

std::size_t ParameterStore::add(std::string name, std::size_t rows, std::size_t cols, bool decay) {
    for (const auto& p : info_) {
        if (p.name == name) throw ConfigError("duplicate parameter name " + name);
    }
    ParameterInfo p{std::move(name), rows, cols, values_.size(), decay};
    values_.resize(values_.size() + rows * cols, 0.0);
    info_.push_back(std::move(p));
    return info_.size() - 1;
}

std::size_t ParameterStore::id_of(std::string_view name) const {
    for (std::size_t i = 0; i < info_.size(); ++i) {
        if (info_[i].name == name) return i;
    }
    throw ConfigError("no parameter named " + std::string(name));
}

MatrixMap ParameterStore::matrix(std::size_t id) { return matrix(std::span<double>(values_), id); }

ConstMatrixMap ParameterStore::matrix(std::size_t id) const {
    return matrix(std::span<const double>(values_), id);
}

MatrixMap ParameterStore::matrix(std::span<double> buffer, std::size_t id) const {
    const auto& p = info_.at(id);
    return MatrixMap(buffer.data() + p.offset, static_cast<Eigen::Index>(p.rows),
                     static_cast<Eigen::Index>(p.cols));
}

ConstMatrixMap ParameterStore::matrix(std::span<const double> buffer, std::size_t id) const {
    const auto& p = info_.at(id);
    return ConstMatrixMap(buffer.data() + p.offset, static_cast<Eigen::Index>(p.rows),
                          static_cast<Eigen::Index>(p.cols));
}

void ParameterStore::write(std::ostream& out) const { write(out, values_); }

void ParameterStore::write(std::ostream& out, std::span<const double> buffer) const {
    out.write(kMagic, sizeof kMagic);
    put<std::uint64_t>(out, info_.size());
    for (const auto& p : info_) {
        put<std::uint32_t>(out, static_cast<std::uint32_t>(p.name.size()));
        out.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
        put<std::uint64_t>(out, p.rows);
        put<std::uint64_t>(out, p.cols);
        out.write(reinterpret_cast<const char*>(buffer.data() + p.offset),
                  static_cast<std::streamsize>(p.size() * sizeof(double)));
    }
}

void ParameterStore::read(std::istream& in, const std::string& where) {
    read(in, values_, where);
}

void ParameterStore::read(std::istream& in, std::span<double> buffer,
                          const std::string& where) const {
    char magic[8];
    if (!in.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof magic) != 0) {
        throw SchemaError(where + ": not a parameter file");
    }
    const auto n = get<std::uint64_t>(in, where);
    if (n != info_.size()) {
        throw SchemaError(where + ": expected " + std::to_string(info_.size()) + " tensors, found " +
                          std::to_string(n));
    }
    for (std::uint64_t i = 0; i < n; ++i) {
        const auto len = get<std::uint32_t>(in, where);
        std::string name(len, '\0');
        if (!in.read(name.data(), len)) throw SchemaError(where + ": truncated");
        const auto rows = get<std::uint64_t>(in, where);
        const auto cols = get<std::uint64_t>(in, where);
        std::size_t id = 0;
        try {
            id = id_of(name);
        } catch (const ConfigError&) {
            throw SchemaError(where + ": unexpected tensor " + name);
        }
        const auto& p = info_[id];
        if (p.rows != rows || p.cols != cols) {
            throw SchemaError(where + ": tensor " + name + " has shape " + std::to_string(rows) + "x" +
                              std::to_string(cols) + ", expected " + std::to_string(p.rows) + "x" +
                              std::to_string(p.cols));
        }
        if (!in.read(reinterpret_cast<char*>(buffer.data() + p.offset),
                     static_cast<std::streamsize>(p.size() * sizeof(double)))) {
            throw SchemaError(where + ": truncated tensor " + name);
        }
    }
}

}  // namespace tracs
