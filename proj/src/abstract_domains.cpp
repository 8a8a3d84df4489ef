#include "gains/abstract_domains.hpp"

#include <algorithm>

namespace gains {

std::string to_string(ReluPolicy p) {
  switch (p) {
    case ReluPolicy::AreaMin: return "area_min";
    case ReluPolicy::AllZero: return "all_zero";
    case ReluPolicy::AllOne: return "all_one";
  }
  return "?";
}

std::string AbstractMode::to_string() const {
  if (kind == DomainKind::Box) return "box";
  return "linear(" + gains::to_string(policy) + ")";
}

namespace {

// Also accepts l == u, which only arises on stable neurons.
ReluRelaxation relax(double l, double u, ReluPolicy policy) {
  if (u <= 0.0) return {0.0, 0.0, 0.0};
  if (l >= 0.0) return {1.0, 1.0, 0.0};
  ReluRelaxation r;
  r.upper_slope = u / (u - l);
  r.upper_offset = -l * u / (u - l);
  switch (policy) {
    case ReluPolicy::AreaMin: r.lambda = u >= -l ? 1.0 : 0.0; break;
    case ReluPolicy::AllZero: r.lambda = 0.0; break;
    case ReluPolicy::AllOne: r.lambda = 1.0; break;
  }
  return r;
}

void accumulate(std::optional<Matrix>& slot, const Matrix& add) {
  if (slot) {
    *slot += add;
  } else {
    slot = add;
  }
}

}  // namespace

ReluRelaxation relu_relaxation(double l, double u, ReluPolicy policy) {
  if (!(l < u)) {
    throw Error("relu_relaxation needs l < u, got l=" + format_double(l) + " u=" + format_double(u));
  }
  return relax(l, u, policy);
}

Box ibp_layer(const Layer& layer, const Box& input, std::optional<Interval> time) {
  if (input.dim() != layer.in_dim()) {
    throw DimensionError(to_string(layer.kind()) + " layer expects " +
                         std::to_string(layer.in_dim()) + " inputs, box has " +
                         std::to_string(input.dim()));
  }
  switch (layer.kind()) {
    case LayerKind::Relu:
      return Box(input.lower().cwiseMax(0.0), input.upper().cwiseMax(0.0));
    case LayerKind::Linear:
      return interval_affine(layer.map(), input);
    case LayerKind::ConcatTimeLinear: {
      if (!time) throw Error("concat_time_linear layer needs a time interval");
      if (time->lo == time->hi) return interval_affine(layer.at_time(time->lo), input);
      const Index d = input.dim();
      Vector lo(d + 1);
      Vector hi(d + 1);
      lo << input.lower(), time->lo;
      hi << input.upper(), time->hi;
      return interval_affine(layer.map(), Box(std::move(lo), std::move(hi)));
    }
  }
  return input;
}

Box ibp_layers(const LayerStack& layers, Box input, std::optional<Interval> time) {
  for (const auto& layer : layers) input = ibp_layer(layer, input, time);
  return input;
}

LinearBounds LinearBounds::identity(const Box& frame) {
  const AffineMap id = AffineMap::identity(frame.dim());
  return {id, id, frame};
}

Box concretize(const LinearBounds& bounds, const Box& input) {
  Vector lo = interval_affine(bounds.lower, input).lower();
  Vector hi = interval_affine(bounds.upper, input).upper();
  if (lo.size() != hi.size()) throw DimensionError("lower and upper maps have different row counts");
  for (Index i = 0; i < lo.size(); ++i) {
    if (lo[i] > hi[i]) std::swap(lo[i], hi[i]);
  }
  return Box(std::move(lo), std::move(hi));
}

CompositeTransformer::CompositeTransformer(Box input, bool linear, ReluPolicy policy)
    : linear_(linear), policy_(policy) {
  Block b;
  b.kind = Kind::Input;
  b.box = std::move(input);
  blocks_.push_back(std::move(b));
}

Box CompositeTransformer::interval_of(const Block& b) const {
  const Index n = b.offset.size();
  Vector lo(n);
  Vector hi(n);
  for (Index r = 0; r < n; ++r) {
    double acc_lo = 0.0;
    double acc_hi = 0.0;
    for (const Term& term : b.terms) {
      const Vector& l = blocks_[term.src].box.lower();
      const Vector& u = blocks_[term.src].box.upper();
      if (term.matrix) {
        const Matrix& m = *term.matrix;
        for (Index c = 0; c < m.cols(); ++c) {
          const double w = m(r, c);
          if (w >= 0.0) {
            acc_lo += w * l[c];
            acc_hi += w * u[c];
          } else {
            acc_lo += w * u[c];
            acc_hi += w * l[c];
          }
        }
      } else if (term.scale >= 0.0) {
        acc_lo += term.scale * l[r];
        acc_hi += term.scale * u[r];
      } else {
        acc_lo += term.scale * u[r];
        acc_hi += term.scale * l[r];
      }
    }
    lo[r] = acc_lo + b.offset[r];
    hi[r] = acc_hi + b.offset[r];
  }
  return Box(std::move(lo), std::move(hi));
}

Index CompositeTransformer::add_affine(std::vector<Term> terms, Vector offset) {
  const Index n = offset.size();
  for (const Term& term : terms) {
    if (term.src < 0 || static_cast<std::size_t>(term.src) >= blocks_.size()) {
      throw Error("affine block refers to an unknown source block");
    }
    const Index src_dim = dim(term.src);
    if (term.matrix ? (term.matrix->rows() != n || term.matrix->cols() != src_dim) : src_dim != n) {
      throw DimensionError("affine block term does not match its source dimension");
    }
  }
  Block b;
  b.kind = Kind::Affine;
  b.terms = std::move(terms);
  b.offset = std::move(offset);
  b.box = interval_of(b);
  blocks_.push_back(std::move(b));
  return static_cast<Index>(blocks_.size()) - 1;
}

Index CompositeTransformer::add_relu(Index src) {
  if (linear_ && blocks_.at(src).kind == Kind::Affine) refine(src);
  const Box& in = blocks_.at(src).box;
  const Index n = in.dim();
  Block b;
  b.kind = Kind::Relu;
  b.src = src;
  b.lambda.resize(n);
  b.slope.resize(n);
  b.intercept.resize(n);
  for (Index i = 0; i < n; ++i) {
    const ReluRelaxation r = relax(in.lower()[i], in.upper()[i], policy_);
    b.lambda[i] = r.lambda;
    b.slope[i] = r.upper_slope;
    b.intercept[i] = r.upper_offset;
  }
  b.box = Box(in.lower().cwiseMax(0.0), in.upper().cwiseMax(0.0));
  blocks_.push_back(std::move(b));
  return static_cast<Index>(blocks_.size()) - 1;
}

Index CompositeTransformer::add_layers(Index src, const LayerStack& layers, std::optional<double> t) {
  Index cur = src;
  for (const Layer& layer : layers) {
    if (layer.in_dim() != dim(cur)) {
      throw DimensionError(to_string(layer.kind()) + " layer expects " +
                           std::to_string(layer.in_dim()) + " inputs, block has " +
                           std::to_string(dim(cur)));
    }
    if (layer.kind() == LayerKind::Relu) {
      cur = add_relu(cur);
      continue;
    }
    if (layer.uses_time() && !t) throw Error("concat_time_linear layer needs a time value");
    const AffineMap map = layer.uses_time() ? layer.at_time(*t) : layer.map();
    cur = add_affine({Term{cur, 1.0, map.coeffs()}}, map.offset());
  }
  return cur;
}

void CompositeTransformer::refine(Index block) {
  if (!linear_ || block == 0) return;
  const Index n = dim(block);
  const AffineMap id = AffineMap::identity(n);
  LinearBounds lb{backsubstitute(block, id, Side::Lower), backsubstitute(block, id, Side::Upper),
                  blocks_.at(block).box};
  blocks_[block].box = box_meet(blocks_[block].box, concretize(lb, input_box()));
}

AffineMap CompositeTransformer::backsubstitute(Index target, const AffineMap& query, Side side) const {
  if (query.cols() != dim(target)) {
    throw DimensionError("query has " + std::to_string(query.cols()) + " columns, block has " +
                         std::to_string(dim(target)));
  }
  if (target == 0) return query;
  const Index q = query.rows();
  std::vector<std::optional<Matrix>> coeff(blocks_.size());
  coeff[target] = query.coeffs();
  Vector cst = query.offset();
  for (Index b = target; b >= 1; --b) {
    if (!coeff[b]) continue;
    const Matrix m = std::move(*coeff[b]);
    coeff[b].reset();
    const Block& blk = blocks_[b];
    if (blk.kind == Kind::Affine) {
      cst += m * blk.offset;
      for (const Term& term : blk.terms) {
        if (term.matrix) {
          accumulate(coeff[term.src], m * *term.matrix);
        } else if (term.scale != 0.0) {
          accumulate(coeff[term.src], term.scale * m);
        }
      }
    } else {
      Matrix out = Matrix::Zero(q, m.cols());
      for (Index r = 0; r < q; ++r) {
        for (Index j = 0; j < m.cols(); ++j) {
          const double c = m(r, j);
          if (c == 0.0) continue;
          const bool use_upper = (side == Side::Upper) == (c > 0.0);
          if (use_upper) {
            out(r, j) = c * blk.slope[j];
            cst[r] += c * blk.intercept[j];
          } else {
            out(r, j) = c * blk.lambda[j];
          }
        }
      }
      accumulate(coeff[blk.src], out);
    }
  }
  Matrix in = coeff[0] ? std::move(*coeff[0]) : Matrix::Zero(q, dim(0));
  return AffineMap(std::move(in), std::move(cst));
}

LinearBounds CompositeTransformer::backsubstitute(Index target, const LinearBounds& query) const {
  LinearBounds out{backsubstitute(target, query.lower, Side::Lower),
                   backsubstitute(target, query.upper, Side::Upper), query.box};
  out.box = box_meet(query.box, concretize(out, input_box()));
  return out;
}

std::vector<Vector> CompositeTransformer::evaluate(const Vector& input) const {
  if (input.size() != dim(0)) throw DimensionError("evaluate: input dimension mismatch");
  std::vector<Vector> val(blocks_.size());
  val[0] = input;
  for (std::size_t b = 1; b < blocks_.size(); ++b) {
    const Block& blk = blocks_[b];
    if (blk.kind == Kind::Relu) {
      const Vector& x = val[blk.src];
      Vector y(x.size());
      for (Index i = 0; i < x.size(); ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
      val[b] = std::move(y);
      continue;
    }
    const Index n = blk.offset.size();
    Vector y(n);
    for (Index r = 0; r < n; ++r) {
      double acc = 0.0;
      for (const Term& term : blk.terms) {
        const Vector& x = val[term.src];
        if (term.matrix) {
          for (Index c = 0; c < x.size(); ++c) acc += (*term.matrix)(r, c) * x[c];
        } else {
          acc += term.scale * x[r];
        }
      }
      y[r] = acc + blk.offset[r];
    }
    val[b] = std::move(y);
  }
  return val;
}

AbstractStep abstract_rk_step(const Dynamics& dyn, const Box& node_box, double t, double h,
                              const Tableau& tab, const AbstractMode& mode, double tau) {
  if (!(h > 0.0)) throw Error("abstract_rk_step: step size must be positive");
  if (node_box.dim() != dyn.state_dim) {
    throw DimensionError("abstract_rk_step: box has dim " + std::to_string(node_box.dim()) +
                         ", dynamics expects " + std::to_string(dyn.state_dim));
  }
  using Term = CompositeTransformer::Term;
  auto tr = std::make_shared<CompositeTransformer>(node_box, mode.kind == DomainKind::Linear,
                                                   mode.policy);
  const Index n = node_box.dim();
  const std::size_t s = tab.stages();
  std::vector<Index> k(s);
  for (std::size_t i = 0; i < s; ++i) {
    Index x = 0;
    std::vector<Term> terms{Term{0, 1.0, std::nullopt}};
    for (std::size_t j = 0; j < i; ++j) {
      if (tab.a[i][j] == 0.0) continue;
      terms.push_back(Term{k[j], h * tab.a[i][j], std::nullopt});
    }
    if (terms.size() > 1) x = tr->add_affine(std::move(terms), Vector::Zero(n));
    k[i] = tr->add_layers(x, dyn.layers, t + tab.c[i] * h);
  }
  std::vector<Term> out_terms{Term{0, 1.0, std::nullopt}};
  std::vector<Term> err_terms;
  for (std::size_t i = 0; i < s; ++i) {
    if (tab.b[i] != 0.0) out_terms.push_back(Term{k[i], h * tab.b[i], std::nullopt});
    if (i < tab.e.size() && tab.e[i] != 0.0) err_terms.push_back(Term{k[i], h * tab.e[i], std::nullopt});
  }
  AbstractStep step;
  step.output = tr->add_affine(std::move(out_terms), Vector::Zero(n));
  step.error = tr->add_affine(std::move(err_terms), Vector::Zero(n));
  tr->refine(step.output);
  tr->refine(step.error);
  step.delta = l1_interval_norm(tr->box(step.error), tau);
  step.transformer = std::move(tr);
  return step;
}

Box combined_bounds(const std::vector<Box>& boxes) {
  if (boxes.empty()) throw Error("combined_bounds needs at least one box");
  Box out = boxes.front();
  for (std::size_t i = 1; i < boxes.size(); ++i) out = box_meet(out, boxes[i]);
  return out;
}

}  // namespace gains
