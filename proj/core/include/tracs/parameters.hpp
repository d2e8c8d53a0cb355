#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace tracs {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;
using MatrixMap = Eigen::Map<Matrix>;
using ConstMatrixMap = Eigen::Map<const Matrix>;

struct ParameterInfo {
    std::string name;
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::size_t offset = 0;
    // Biases and layer-norm parameters are excluded from weight decay.
    bool decay = true;

    std::size_t size() const noexcept { return rows * cols; }
};

// Named row-major tensors packed into one contiguous buffer. Gradients use a
// buffer of the same layout, so optimizers and serializers work on flat spans.
class ParameterStore {
public:
    std::size_t add(std::string name, std::size_t rows, std::size_t cols, bool decay = true);

    std::size_t size() const noexcept { return values_.size(); }
    std::size_t count() const noexcept { return info_.size(); }
    const std::vector<ParameterInfo>& info() const noexcept { return info_; }
    const ParameterInfo& info(std::size_t id) const { return info_.at(id); }
    std::size_t id_of(std::string_view name) const;

    std::span<double> values() noexcept { return values_; }
    std::span<const double> values() const noexcept { return values_; }

    MatrixMap matrix(std::size_t id);
    ConstMatrixMap matrix(std::size_t id) const;
    MatrixMap matrix(std::span<double> buffer, std::size_t id) const;
    ConstMatrixMap matrix(std::span<const double> buffer, std::size_t id) const;

    std::vector<double> zeros_like() const { return std::vector<double>(values_.size(), 0.0); }

    // Binary layout: "TRACSPRM" magic, u64 count, then per tensor
    // (u32 name length, name, u64 rows, u64 cols, rows*cols little-endian f64).
    void write(std::ostream& out) const;
    void write(std::ostream& out, std::span<const double> buffer) const;
    // Reads tensors by name into this store; names and shapes must match exactly.
    void read(std::istream& in, const std::string& where);
    void read(std::istream& in, std::span<double> buffer, const std::string& where) const;

private:
    std::vector<ParameterInfo> info_;
    std::vector<double> values_;
};

}  // namespace tracs
