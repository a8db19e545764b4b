#include "mpcrl/param_layout.hpp"

#include <algorithm>

namespace mpcrl {

ParamLayout& ParamLayout::add(std::string name, Index rows, Index cols, bool symmetric) {
  if (contains(name)) throw Error("duplicate parameter block '" + name + "'");
  if (symmetric && rows != cols) throw DimensionError("symmetric block '" + name + "' must be square");
  ParamBlock b{std::move(name), rows, cols, symmetric, size_};
  size_ += b.size();
  blocks_.push_back(std::move(b));
  return *this;
}

const ParamBlock& ParamLayout::block(const std::string& name) const {
  auto it = std::find_if(blocks_.begin(), blocks_.end(), [&](const ParamBlock& b) { return b.name == name; });
  if (it == blocks_.end()) throw Error("unknown parameter block '" + name + "'");
  return *it;
}

bool ParamLayout::contains(const std::string& name) const {
  return std::any_of(blocks_.begin(), blocks_.end(), [&](const ParamBlock& b) { return b.name == name; });
}

Matrix ParamLayout::get(const Vector& flat, const std::string& name) const {
  require_dim(flat.size(), size_, "parameter vector");
  const auto& b = block(name);
  return Eigen::Map<const Matrix>(flat.data() + b.offset, b.rows, b.cols);
}

void ParamLayout::set(Vector& flat, const std::string& name, const Matrix& value) const {
  require_dim(flat.size(), size_, "parameter vector");
  const auto& b = block(name);
  if (value.rows() != b.rows || value.cols() != b.cols) {
    throw DimensionError("block '" + name + "' has shape " + std::to_string(b.rows) + "x" +
                         std::to_string(b.cols));
  }
  Eigen::Map<Matrix>(flat.data() + b.offset, b.rows, b.cols) = value;
}

std::vector<std::string> ParamLayout::flat_names() const {
  std::vector<std::string> names;
  names.reserve(static_cast<std::size_t>(size_));
  for (const auto& b : blocks_) {
    if (b.size() == 1) {
      names.push_back(b.name);
      continue;
    }
    for (Index j = 0; j < b.cols; ++j) {
      for (Index i = 0; i < b.rows; ++i) {
        if (b.cols == 1) {
          names.push_back(b.name + "[" + std::to_string(i) + "]");
        } else {
          names.push_back(b.name + "[" + std::to_string(i) + "][" + std::to_string(j) + "]");
        }
      }
    }
  }
  return names;
}

void ParamLayout::symmetrize(Vector& flat) const {
  require_dim(flat.size(), size_, "parameter vector");
  for (const auto& b : blocks_) {
    if (!b.symmetric) continue;
    Eigen::Map<Matrix> m(flat.data() + b.offset, b.rows, b.cols);
    const Matrix sym = symmetric_part(m);
    m = sym;
  }
}

bool ParamLayout::operator==(const ParamLayout& other) const {
  if (size_ != other.size_ || blocks_.size() != other.blocks_.size()) return false;
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    const auto& a = blocks_[i];
    const auto& b = other.blocks_[i];
    if (a.name != b.name || a.rows != b.rows || a.cols != b.cols || a.symmetric != b.symmetric) return false;
  }
  return true;
}

}  // namespace mpcrl
