#ifndef RBN_SPARSE_HPP
#define RBN_SPARSE_HPP

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace rbn {

// One sparse row: strictly increasing indices and the stored values.
struct SparseRow {
    std::span<const std::uint32_t> idx;
    std::span<const double> val;
};

/* Read-only access to n sparse rows of a common dimension. Rows may be
 * stored (SparseBatch) or computed on demand into `scratch`
 * (ExpandedBatch); the returned view is valid until the next call with the
 * same scratch buffer. */
class RowSource {
public:
    virtual ~RowSource() = default;

    virtual std::size_t rows() const = 0;
    virtual std::size_t dim() const = 0;
    virtual std::size_t nnz() const = 0;
    virtual SparseRow row(std::size_t i, std::vector<double>& scratch) const = 0;

    // max_i ||X_i||_2, one pass.
    double max_norm() const;
};

// Compressed sparse rows held in memory.
class SparseBatch final : public RowSource {
public:
    explicit SparseBatch(std::size_t dim) : dim_(dim), offsets_{0} {}

    // Appends a row; throws ShapeError unless indices are strictly increasing and < dim.
    void push_back(std::span<const std::uint32_t> idx, std::span<const double> val);
    // Appends a dense row, storing every coordinate.
    void push_dense(std::span<const double> values);

    std::size_t rows() const override { return offsets_.size() - 1; }
    std::size_t dim() const override { return dim_; }
    std::size_t nnz() const override { return idx_.size(); }
    SparseRow row(std::size_t i, std::vector<double>& scratch) const override;

    SparseRow row(std::size_t i) const {
        const std::size_t b = offsets_[i], e = offsets_[i + 1];
        return {{idx_.data() + b, e - b}, {val_.data() + b, e - b}};
    }

    void reserve(std::size_t rows, std::size_t nnz);

private:
    std::size_t dim_;
    std::vector<std::size_t> offsets_;
    std::vector<std::uint32_t> idx_;
    std::vector<double> val_;
};

} // namespace rbn

#endif
