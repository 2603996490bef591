#pragma once

// Dense order-N tensors stored in the canonical linearization: the mode-0
// index varies fastest (generalized column-major). Every unfolding below is
// defined relative to that ordering. Modes are 0-based throughout.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <limits>
#include <numeric>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace tenips {

using Index = Eigen::Index;

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

class Shape {
 public:
  Shape() = default;
  Shape(std::initializer_list<Index> dims) : Shape(std::vector<Index>(dims)) {}
  explicit Shape(std::vector<Index> dims) : dims_(std::move(dims)) {
    if (dims_.empty()) throw std::invalid_argument("Shape: order must be at least 1");
    Index total = 1;
    for (Index d : dims_) {
      if (d < 1) throw std::invalid_argument("Shape: every mode size must be >= 1");
      if (total > std::numeric_limits<Index>::max() / d)
        throw std::overflow_error("Shape: element count overflows");
      total *= d;
    }
    size_ = total;
  }

  Index order() const { return static_cast<Index>(dims_.size()); }
  Index operator[](Index n) const { return dims_[static_cast<std::size_t>(n)]; }
  const std::vector<Index>& dims() const { return dims_; }
  Index size() const { return size_; }

  /// Product of the mode sizes strictly before / after `mode`.
  Index size_before(Index mode) const {
    Index p = 1;
    for (Index m = 0; m < mode; ++m) p *= (*this)[m];
    return p;
  }
  Index size_after(Index mode) const {
    Index p = 1;
    for (Index m = mode + 1; m < order(); ++m) p *= (*this)[m];
    return p;
  }

  Shape with_mode(Index mode, Index size) const {
    auto dims = dims_;
    dims[static_cast<std::size_t>(mode)] = size;
    return Shape(std::move(dims));
  }

  bool operator==(const Shape& other) const { return dims_ == other.dims_; }
  bool operator!=(const Shape& other) const { return !(*this == other); }

  std::string to_string() const {
    std::ostringstream os;
    for (std::size_t i = 0; i < dims_.size(); ++i) os << (i ? "x" : "") << dims_[i];
    return os.str();
  }

 private:
  std::vector<Index> dims_;
  Index size_ = 0;
};

inline Index linear_index(const Shape& shape, std::span<const Index> idx) {
  if (static_cast<Index>(idx.size()) != shape.order())
    throw std::invalid_argument("linear_index: index arity does not match tensor order");
  Index lin = 0;
  Index stride = 1;
  for (Index n = 0; n < shape.order(); ++n) {
    const Index i = idx[static_cast<std::size_t>(n)];
    if (i < 0 || i >= shape[n]) throw std::out_of_range("linear_index: index out of range");
    lin += i * stride;
    stride *= shape[n];
  }
  return lin;
}

inline std::vector<Index> multi_index(const Shape& shape, Index linear) {
  std::vector<Index> idx(static_cast<std::size_t>(shape.order()));
  for (Index n = 0; n < shape.order(); ++n) {
    idx[static_cast<std::size_t>(n)] = linear % shape[n];
    linear /= shape[n];
  }
  return idx;
}

template <typename Scalar>
class Tensor {
 public:
  using Vector = VectorX<Scalar>;
  using Matrix = MatrixX<Scalar>;

  Tensor() = default;
  explicit Tensor(Shape shape) : shape_(std::move(shape)), data_(Vector::Zero(shape_.size())) {}
  Tensor(Shape shape, Vector data) : shape_(std::move(shape)), data_(std::move(data)) {
    if (data_.size() != shape_.size())
      throw std::invalid_argument("Tensor: data length " + std::to_string(data_.size()) +
                                  " does not match shape " + shape_.to_string());
  }

  static Tensor Zero(const Shape& shape) { return Tensor(shape); }
  static Tensor Constant(const Shape& shape, Scalar value) {
    return Tensor(shape, Vector::Constant(shape.size(), value));
  }

  const Shape& shape() const { return shape_; }
  Index order() const { return shape_.order(); }
  Index size() const { return data_.size(); }

  const Vector& data() const { return data_; }
  Vector& data() { return data_; }

  Scalar operator[](Index linear) const { return data_[linear]; }
  Scalar& operator[](Index linear) { return data_[linear]; }

  Scalar operator()(std::span<const Index> idx) const { return data_[linear_index(shape_, idx)]; }
  Scalar& operator()(std::span<const Index> idx) { return data_[linear_index(shape_, idx)]; }
  Scalar operator()(std::initializer_list<Index> idx) const {
    return (*this)(std::span<const Index>(idx.begin(), idx.size()));
  }
  Scalar& operator()(std::initializer_list<Index> idx) {
    return (*this)(std::span<const Index>(idx.begin(), idx.size()));
  }

  bool all_finite() const { return data_.allFinite(); }

  Tensor& operator+=(const Tensor& o) { check_same(o); data_ += o.data_; return *this; }
  Tensor& operator-=(const Tensor& o) { check_same(o); data_ -= o.data_; return *this; }
  Tensor& operator*=(Scalar s) { data_ *= s; return *this; }

  friend Tensor operator+(Tensor a, const Tensor& b) { return a += b; }
  friend Tensor operator-(Tensor a, const Tensor& b) { return a -= b; }
  friend Tensor operator*(Tensor a, Scalar s) { return a *= s; }
  friend Tensor operator*(Scalar s, Tensor a) { return a *= s; }

  bool operator==(const Tensor& o) const { return shape_ == o.shape_ && data_ == o.data_; }

 private:
  void check_same(const Tensor& o) const {
    if (shape_ != o.shape_) throw std::invalid_argument("Tensor: shape mismatch");
  }

  Shape shape_;
  Vector data_;
};

using TensorXd = Tensor<double>;

/// Binary observation pattern, same linearization as Tensor.
class Mask {
 public:
  Mask() = default;
  explicit Mask(Shape shape)
      : shape_(std::move(shape)), bits_(static_cast<std::size_t>(shape_.size()), 0) {}
  Mask(Shape shape, std::vector<std::uint8_t> bits) : shape_(std::move(shape)), bits_(std::move(bits)) {
    if (static_cast<Index>(bits_.size()) != shape_.size())
      throw std::invalid_argument("Mask: bit count does not match shape");
    for (auto b : bits_)
      if (b > 1) throw std::invalid_argument("Mask: entries must be 0 or 1");
  }

  static Mask Full(const Shape& shape) {
    return Mask(shape, std::vector<std::uint8_t>(static_cast<std::size_t>(shape.size()), 1));
  }

  const Shape& shape() const { return shape_; }
  Index size() const { return static_cast<Index>(bits_.size()); }
  const std::vector<std::uint8_t>& bits() const { return bits_; }

  bool operator[](Index linear) const { return bits_[static_cast<std::size_t>(linear)] != 0; }
  void set(Index linear, bool observed) { bits_[static_cast<std::size_t>(linear)] = observed ? 1 : 0; }

  Index observed_count() const {
    return static_cast<Index>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
  }
  double observed_ratio() const { return static_cast<double>(observed_count()) / static_cast<double>(size()); }

  /// The mask set: linear indices of observed entries, increasing.
  std::vector<Index> observed_indices() const {
    std::vector<Index> out;
    out.reserve(static_cast<std::size_t>(observed_count()));
    for (Index i = 0; i < size(); ++i)
      if ((*this)[i]) out.push_back(i);
    return out;
  }

  template <typename Scalar = double>
  Tensor<Scalar> as_tensor() const {
    VectorX<Scalar> v(size());
    for (Index i = 0; i < size(); ++i) v[i] = (*this)[i] ? Scalar(1) : Scalar(0);
    return Tensor<Scalar>(shape_, std::move(v));
  }

  bool operator==(const Mask& o) const { return shape_ == o.shape_ && bits_ == o.bits_; }

 private:
  Shape shape_;
  std::vector<std::uint8_t> bits_;
};

// ---------------------------------------------------------------------------
// Mode-n unfolding. Column j of the result collects the fiber whose remaining
// indices map to j with the lower modes varying fastest. Viewing the data as a
// (before, I_n, after) block, entry (a, i, b) lands in column a + before * b.

inline void check_mode(const Shape& shape, Index mode) {
  if (mode < 0 || mode >= shape.order())
    throw std::out_of_range("mode " + std::to_string(mode) + " out of range for order " +
                            std::to_string(shape.order()));
}

template <typename Scalar>
MatrixX<Scalar> unfold(const Tensor<Scalar>& t, Index mode) {
  const Shape& s = t.shape();
  check_mode(s, mode);
  const Index before = s.size_before(mode), n = s[mode], after = s.size_after(mode);
  MatrixX<Scalar> out(n, before * after);
  for (Index b = 0; b < after; ++b) {
    Eigen::Map<const MatrixX<Scalar>> slab(t.data().data() + b * before * n, before, n);
    out.middleCols(b * before, before) = slab.transpose();
  }
  return out;
}

template <typename Scalar>
Tensor<Scalar> fold(const MatrixX<Scalar>& m, Index mode, const Shape& shape) {
  check_mode(shape, mode);
  const Index before = shape.size_before(mode), n = shape[mode], after = shape.size_after(mode);
  if (m.rows() != n || m.cols() != before * after)
    throw std::invalid_argument("fold: matrix dimensions do not match shape " + shape.to_string());
  Tensor<Scalar> out(shape);
  for (Index b = 0; b < after; ++b) {
    Eigen::Map<MatrixX<Scalar>> slab(out.data().data() + b * before * n, before, n);
    slab = m.middleCols(b * before, before).transpose();
  }
  return out;
}

/// Reorders modes: mode k of the result is mode perm[k] of the input.
template <typename Scalar>
Tensor<Scalar> permute_modes(const Tensor<Scalar>& t, std::span<const Index> perm) {
  const Shape& s = t.shape();
  const Index order = s.order();
  if (static_cast<Index>(perm.size()) != order)
    throw std::invalid_argument("permute_modes: permutation length does not match order");
  std::vector<Index> seen(static_cast<std::size_t>(order), 0);
  for (Index p : perm) {
    if (p < 0 || p >= order || seen[static_cast<std::size_t>(p)]++)
      throw std::invalid_argument("permute_modes: not a permutation");
  }
  std::vector<Index> in_stride(static_cast<std::size_t>(order));
  for (Index n = 0, st = 1; n < order; ++n) {
    in_stride[static_cast<std::size_t>(n)] = st;
    st *= s[n];
  }
  std::vector<Index> out_dims(static_cast<std::size_t>(order)), stride(static_cast<std::size_t>(order));
  for (Index k = 0; k < order; ++k) {
    out_dims[static_cast<std::size_t>(k)] = s[perm[static_cast<std::size_t>(k)]];
    stride[static_cast<std::size_t>(k)] = in_stride[static_cast<std::size_t>(perm[static_cast<std::size_t>(k)])];
  }
  Tensor<Scalar> out{Shape(out_dims)};
  std::vector<Index> counter(static_cast<std::size_t>(order), 0);
  Index src = 0;
  const Index total = t.size();
  for (Index lin = 0; lin < total; ++lin) {
    out[lin] = t[src];
    for (std::size_t k = 0; k < counter.size(); ++k) {
      src += stride[k];
      if (++counter[k] < out_dims[k]) break;
      src -= stride[k] * out_dims[k];
      counter[k] = 0;
    }
  }
  return out;
}

/// Row/column split of the modes for a matricization.
class UnfoldingSpec {
 public:
  UnfoldingSpec() = default;
  UnfoldingSpec(const Shape& shape, std::vector<Index> row_modes) : rows_(std::move(row_modes)) {
    std::sort(rows_.begin(), rows_.end());
    const Index order = shape.order();
    if (rows_.empty() || static_cast<Index>(rows_.size()) >= order)
      throw std::invalid_argument("UnfoldingSpec: subset must be nonempty and strict");
    if (std::adjacent_find(rows_.begin(), rows_.end()) != rows_.end())
      throw std::invalid_argument("UnfoldingSpec: repeated mode");
    for (Index m : rows_) check_mode(shape, m);
    for (Index m = 0; m < order; ++m)
      if (!std::binary_search(rows_.begin(), rows_.end(), m)) cols_.push_back(m);
    row_dim_ = 1;
    col_dim_ = 1;
    for (Index m : rows_) row_dim_ *= shape[m];
    for (Index m : cols_) col_dim_ *= shape[m];
    order_ = order;
  }

  const std::vector<Index>& row_modes() const { return rows_; }
  const std::vector<Index>& col_modes() const { return cols_; }
  Index row_dim() const { return row_dim_; }
  Index col_dim() const { return col_dim_; }
  Index order() const { return order_; }

  /// Row modes followed by column modes.
  std::vector<Index> permutation() const {
    std::vector<Index> p = rows_;
    p.insert(p.end(), cols_.begin(), cols_.end());
    return p;
  }

  bool matches(const Shape& shape) const {
    if (shape.order() != order_) return false;
    Index r = 1;
    for (Index m : rows_) r *= shape[m];
    return r == row_dim_ && shape.size() == row_dim_ * col_dim_;
  }

  bool operator==(const UnfoldingSpec& o) const { return rows_ == o.rows_ && order_ == o.order_; }

  std::string to_string() const {
    std::ostringstream os;
    os << "{";
    for (std::size_t i = 0; i < rows_.size(); ++i) os << (i ? "," : "") << rows_[i];
    os << "} " << row_dim_ << "x" << col_dim_;
    return os.str();
  }

 private:
  std::vector<Index> rows_, cols_;
  Index row_dim_ = 0, col_dim_ = 0, order_ = 0;
};

/// S-unfolding: permute the row modes to the front, then read the data
/// columnwise into a row_dim x col_dim matrix.
template <typename Scalar>
MatrixX<Scalar> unfold(const Tensor<Scalar>& t, const UnfoldingSpec& spec) {
  if (!spec.matches(t.shape())) throw std::invalid_argument("unfold: spec does not match shape");
  const auto perm = spec.permutation();
  Tensor<Scalar> p = permute_modes(t, perm);
  return Eigen::Map<const MatrixX<Scalar>>(p.data().data(), spec.row_dim(), spec.col_dim());
}

template <typename Scalar>
Tensor<Scalar> fold(const MatrixX<Scalar>& m, const UnfoldingSpec& spec, const Shape& shape) {
  if (!spec.matches(shape)) throw std::invalid_argument("fold: spec does not match shape");
  if (m.rows() != spec.row_dim() || m.cols() != spec.col_dim())
    throw std::invalid_argument("fold: matrix dimensions do not match spec");
  const auto perm = spec.permutation();
  std::vector<Index> permuted_dims;
  for (Index p : perm) permuted_dims.push_back(shape[p]);
  Tensor<Scalar> permuted(Shape(permuted_dims),
                          Eigen::Map<const VectorX<Scalar>>(m.data(), m.size()));
  std::vector<Index> inverse(perm.size());
  for (std::size_t k = 0; k < perm.size(); ++k) inverse[static_cast<std::size_t>(perm[k])] = static_cast<Index>(k);
  return permute_modes(permuted, inverse);
}

/// Subset S minimizing |I_S - I_{S^C}|; ties go to the smallest |S|, then to
/// the lexicographically smallest S.
inline UnfoldingSpec square_set(const Shape& shape) {
  const Index order = shape.order();
  if (order < 2) throw std::invalid_argument("square_set: order-1 tensors have no strict subset");
  if (order > 40) throw std::invalid_argument("square_set: order too large for exhaustive search");
  const Index total = shape.size();
  std::vector<Index> best;
  Index best_gap = std::numeric_limits<Index>::max();
  // Subsets of each size in lexicographic order via a sliding selection vector.
  for (Index k = 1; k < order; ++k) {
    std::vector<bool> pick(static_cast<std::size_t>(order), false);
    std::fill(pick.begin(), pick.begin() + k, true);
    do {
      std::vector<Index> subset;
      Index rows = 1;
      for (Index m = 0; m < order; ++m)
        if (pick[static_cast<std::size_t>(m)]) {
          subset.push_back(m);
          rows *= shape[m];
        }
      const Index cols = total / rows;
      const Index gap = rows > cols ? rows - cols : cols - rows;
      if (gap < best_gap) {
        best_gap = gap;
        best = std::move(subset);
      }
    } while (std::prev_permutation(pick.begin(), pick.end()));
  }
  return UnfoldingSpec(shape, best);
}

/// n-mode product t x_mode u, with u of size J x I_mode.
template <typename Scalar, typename Derived>
Tensor<Scalar> mode_product(const Tensor<Scalar>& t, const Eigen::MatrixBase<Derived>& u, Index mode) {
  const Shape& s = t.shape();
  check_mode(s, mode);
  if (u.cols() != s[mode])
    throw std::invalid_argument("mode_product: matrix has " + std::to_string(u.cols()) +
                                " columns, mode " + std::to_string(mode) + " has size " +
                                std::to_string(s[mode]));
  const Index before = s.size_before(mode), n = s[mode], after = s.size_after(mode), j = u.rows();
  Tensor<Scalar> out(s.with_mode(mode, j));
  const MatrixX<Scalar> um = u;
  if (before == 1) {
    Eigen::Map<const MatrixX<Scalar>> x(t.data().data(), n, after);
    Eigen::Map<MatrixX<Scalar>> y(out.data().data(), j, after);
    y.noalias() = um * x;
    return out;
  }
  for (Index b = 0; b < after; ++b) {
    Eigen::Map<const MatrixX<Scalar>> x(t.data().data() + b * before * n, before, n);
    Eigen::Map<MatrixX<Scalar>> y(out.data().data() + b * before * j, before, j);
    y.noalias() = x * um.transpose();
  }
  return out;
}

template <typename Scalar>
Tensor<Scalar> hadamard(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  if (a.shape() != b.shape()) throw std::invalid_argument("hadamard: shape mismatch");
  return Tensor<Scalar>(a.shape(), a.data().cwiseProduct(b.data()));
}

template <typename Scalar>
Tensor<Scalar> hadamard(const Tensor<Scalar>& a, const Mask& m) {
  if (a.shape() != m.shape()) throw std::invalid_argument("hadamard: shape mismatch");
  Tensor<Scalar> out(a.shape());
  for (Index i = 0; i < a.size(); ++i) out[i] = m[i] ? a[i] : Scalar(0);
  return out;
}

template <typename Scalar>
Scalar inner(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  if (a.shape() != b.shape()) throw std::invalid_argument("inner: shape mismatch");
  return a.data().dot(b.data());
}

namespace detail {
template <typename Derived>
void require_finite(const Eigen::DenseBase<Derived>& x, const char* what) {
  if (!x.allFinite()) throw std::domain_error(std::string(what) + ": non-finite input");
}
}  // namespace detail

template <typename Scalar>
Scalar frobenius_norm(const Tensor<Scalar>& t) {
  detail::require_finite(t.data(), "frobenius_norm");
  return t.data().norm();
}

template <typename Scalar>
Scalar max_abs(const Tensor<Scalar>& t) {
  detail::require_finite(t.data(), "max_abs");
  return t.size() ? t.data().cwiseAbs().maxCoeff() : Scalar(0);
}

/// Singular values in non-increasing order.
template <typename Derived>
VectorX<typename Derived::Scalar> singular_values(const Eigen::MatrixBase<Derived>& m) {
  detail::require_finite(m, "singular_values");
  using Mat = MatrixX<typename Derived::Scalar>;
  Eigen::BDCSVD<Mat> svd(m.derived().eval());
  if (svd.info() != Eigen::Success) throw std::runtime_error("singular_values: SVD failed");
  return svd.singularValues();
}

template <typename Derived>
typename Derived::Scalar spectral_norm(const Eigen::MatrixBase<Derived>& m) {
  const auto s = singular_values(m);
  return s.size() ? s[0] : typename Derived::Scalar(0);
}

template <typename Derived>
typename Derived::Scalar nuclear_norm(const Eigen::MatrixBase<Derived>& m) {
  return singular_values(m).sum();
}

/// Count of singular values above rel_tol * sigma_1.
template <typename Derived>
Index numerical_rank(const Eigen::MatrixBase<Derived>& m, double rel_tol = 1e-8) {
  const auto s = singular_values(m);
  if (s.size() == 0 || s[0] == 0) return 0;
  return static_cast<Index>((s.array() > rel_tol * s[0]).count());
}

}  // namespace tenips
