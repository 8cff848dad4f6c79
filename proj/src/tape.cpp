#include "ptycho/tape.hpp"

#include <cmath>

#include "ptycho/fft.hpp"

namespace ptycho {

const char* op_name(Op op) {
  switch (op) {
    case Op::Var: return "var";
    case Op::Const: return "const";
    case Op::Dft: return "dft";
    case Op::Idft: return "idft";
    case Op::Fresnel: return "fresnel";
    case Op::Extract: return "extract";
    case Op::Embed: return "embed";
    case Op::Project: return "project";
    case Op::Hadamard: return "hadamard";
    case Op::Add: return "add";
    case Op::Sub: return "sub";
    case Op::Scale: return "scale";
    case Op::Conj: return "conj";
    case Op::ModulusSq: return "modulus_sq";
    case Op::GuardedSqrt: return "guarded_sqrt";
    case Op::Real: return "real";
    case Op::Sum: return "sum";
  }
  return "?";
}

namespace {

ComplexField to_complex(const RealField& r) {
  ComplexField out(r.shape);
  for (std::size_t i = 0; i < r.data.size(); ++i) out.data[i] = cplx(r.data[i], 0.0);
  return out;
}

// Product of the transformed extents (trailing two axes for stacked input).
double dft_extent(const ComplexField& f) {
  if (f.ndim() == 1) return double(f.shape[0]);
  return double(f.shape[f.ndim() - 2]) * double(f.shape[f.ndim() - 1]);
}

} // namespace

int Tape::push(Node n) {
  for (const cplx& v : n.value.data) {
    if (!std::isfinite(v.real()) || !std::isfinite(v.imag()))
      throw NumericError(std::string("tape: non-finite value in node ") +
                         std::to_string(nodes_.size()) + " (" + op_name(n.op) + ")");
  }
  nodes_.push_back(std::move(n));
  return int(nodes_.size()) - 1;
}

int Tape::var(ComplexField v) {
  Node n;
  n.op = Op::Var;
  n.value = std::move(v);
  int id = push(std::move(n));
  leaf_ids_.push_back(id);
  return id;
}

int Tape::constant(ComplexField v, bool real_valued) {
  Node n;
  n.op = Op::Const;
  n.value = std::move(v);
  n.real_valued = real_valued;
  return push(std::move(n));
}

int Tape::constant_real(const RealField& v) { return constant(to_complex(v), true); }

int Tape::dft_(int a) {
  Node n;
  n.op = Op::Dft;
  n.a = a;
  n.value = dft(nodes_[a].value);
  return push(std::move(n));
}

int Tape::idft_(int a) {
  Node n;
  n.op = Op::Idft;
  n.a = a;
  n.value = idft(nodes_[a].value);
  return push(std::move(n));
}

int Tape::fresnel_(int a, double z, double lambda) {
  Node n;
  n.op = Op::Fresnel;
  n.a = a;
  n.z = z;
  n.lambda = lambda;
  n.value = fresnel_propagate(nodes_[a].value, z, lambda);
  return push(std::move(n));
}

int Tape::extract_(int a, const PatchWindow& w) {
  Node n;
  n.op = Op::Extract;
  n.a = a;
  n.win = w;
  n.host_shape = nodes_[a].value.shape;
  n.value = extract_patch(nodes_[a].value, w);
  return push(std::move(n));
}

int Tape::embed_(int a, const PatchWindow& w, const Shape& host_shape) {
  Node n;
  n.op = Op::Embed;
  n.a = a;
  n.win = w;
  n.host_shape = host_shape;
  n.value = embed_patch(nodes_[a].value, w, host_shape);
  return push(std::move(n));
}

int Tape::project_(int a, std::size_t axis) {
  Node n;
  n.op = Op::Project;
  n.a = a;
  n.axis = axis;
  n.value = project_axis(nodes_[a].value, axis);
  return push(std::move(n));
}

int Tape::hadamard_(int a, int b) {
  if (nodes_[a].real_valued != nodes_[b].real_valued)
    throw std::invalid_argument("tape: hadamard of mixed real/complex nodes");
  Node n;
  n.op = Op::Hadamard;
  n.a = a;
  n.b = b;
  n.real_valued = nodes_[a].real_valued;
  n.value = hadamard(nodes_[a].value, nodes_[b].value);
  return push(std::move(n));
}

int Tape::add_(int a, int b) {
  Node n;
  n.op = Op::Add;
  n.a = a;
  n.b = b;
  n.real_valued = nodes_[a].real_valued && nodes_[b].real_valued;
  n.value = add(nodes_[a].value, nodes_[b].value);
  return push(std::move(n));
}

int Tape::sub_(int a, int b) {
  Node n;
  n.op = Op::Sub;
  n.a = a;
  n.b = b;
  n.real_valued = nodes_[a].real_valued && nodes_[b].real_valued;
  n.value = sub(nodes_[a].value, nodes_[b].value);
  return push(std::move(n));
}

int Tape::scale_(int a, cplx factor) {
  Node n;
  n.op = Op::Scale;
  n.a = a;
  n.factor = factor;
  n.real_valued = nodes_[a].real_valued && factor.imag() == 0.0;
  n.value = scale(nodes_[a].value, factor);
  return push(std::move(n));
}

int Tape::conj_(int a) {
  Node n;
  n.op = Op::Conj;
  n.a = a;
  n.real_valued = nodes_[a].real_valued;
  n.value = conj_field(nodes_[a].value);
  return push(std::move(n));
}

int Tape::modulus_sq_(int a) {
  Node n;
  n.op = Op::ModulusSq;
  n.a = a;
  n.real_valued = true;
  const ComplexField& v = nodes_[a].value;
  n.value = ComplexField(v.shape);
  for (std::size_t i = 0; i < v.data.size(); ++i)
    n.value.data[i] = cplx(std::norm(v.data[i]), 0.0);
  return push(std::move(n));
}

int Tape::guarded_sqrt_(int a, double eps) {
  if (!nodes_[a].real_valued)
    throw std::invalid_argument("tape: guarded_sqrt requires a real-valued node");
  Node n;
  n.op = Op::GuardedSqrt;
  n.a = a;
  n.guard_eps = eps;
  n.real_valued = true;
  const ComplexField& h = nodes_[a].value;
  n.value = ComplexField(h.shape);
  for (std::size_t i = 0; i < h.data.size(); ++i) {
    double hv = h.data[i].real();
    if (hv < 0.0)
      throw std::invalid_argument("tape: guarded_sqrt of negative intensity");
    n.value.data[i] = cplx(std::sqrt(hv + eps), 0.0);
  }
  return push(std::move(n));
}

int Tape::real_(int a) {
  Node n;
  n.op = Op::Real;
  n.a = a;
  n.real_valued = true;
  const ComplexField& v = nodes_[a].value;
  n.value = ComplexField(v.shape);
  for (std::size_t i = 0; i < v.data.size(); ++i) n.value.data[i] = cplx(v.data[i].real(), 0.0);
  return push(std::move(n));
}

int Tape::sum_(int a) {
  if (!nodes_[a].real_valued)
    throw std::invalid_argument("tape: sum requires a real-valued node");
  Node n;
  n.op = Op::Sum;
  n.a = a;
  n.real_valued = true;
  cplx s(0.0, 0.0);
  for (const cplx& v : nodes_[a].value.data) s += v;
  n.value = ComplexField(Shape{1});
  n.value.data[0] = cplx(s.real(), 0.0);
  return push(std::move(n));
}

double Tape::loss() const {
  if (nodes_.empty()) throw StateError("tape: empty");
  const Node& t = nodes_.back();
  if (!t.real_valued || t.value.size() != 1)
    throw StateError("tape: terminal node is not a real scalar");
  return t.value.data[0].real();
}

std::vector<ComplexField> Tape::backward() const {
  if (nodes_.empty()) throw StateError("tape: backward before forward");
  const Node& t = nodes_.back();
  if (!t.real_valued || t.value.size() != 1)
    throw StateError("tape: backward requires a real scalar terminal node");

  std::vector<ComplexField> bar(nodes_.size());
  auto accum = [&](int id, ComplexField contrib) {
    if (bar[id].size() == 0)
      bar[id] = std::move(contrib);
    else
      for (std::size_t i = 0; i < bar[id].data.size(); ++i)
        bar[id].data[i] += contrib.data[i];
  };
  // g * conj(w) accumulated without temporaries (the hot hadamard adjoint)
  auto accum_mul_conj = [&](int id, const ComplexField& g, const ComplexField& w) {
    if (bar[id].size() == 0) {
      ComplexField out(g.shape);
      for (std::size_t i = 0; i < g.data.size(); ++i)
        out.data[i] = g.data[i] * std::conj(w.data[i]);
      bar[id] = std::move(out);
    } else {
      for (std::size_t i = 0; i < g.data.size(); ++i)
        bar[id].data[i] += g.data[i] * std::conj(w.data[i]);
    }
  };
  auto accum_scaled = [&](int id, const ComplexField& g, cplx factor) {
    if (bar[id].size() == 0) {
      ComplexField out(g.shape);
      for (std::size_t i = 0; i < g.data.size(); ++i) out.data[i] = g.data[i] * factor;
      bar[id] = std::move(out);
    } else {
      for (std::size_t i = 0; i < g.data.size(); ++i) bar[id].data[i] += g.data[i] * factor;
    }
  };
  auto real_part = [](const ComplexField& f) {
    ComplexField out(f.shape);
    for (std::size_t i = 0; i < f.data.size(); ++i) out.data[i] = cplx(f.data[i].real(), 0.0);
    return out;
  };

  bar.back() = ComplexField(Shape{1}, cplx(1.0, 0.0));

  for (int i = int(nodes_.size()) - 1; i >= 0; --i) {
    if (bar[i].size() == 0) continue;
    const Node& n = nodes_[i];
    const ComplexField& g = bar[i];
    switch (n.op) {
      case Op::Var:
      case Op::Const:
        break;
      case Op::Dft: {
        ComplexField adj = idft(g);
        double fac = dft_extent(nodes_[n.a].value);
        for (cplx& v : adj.data) v *= fac;
        accum(n.a, std::move(adj));
        break;
      }
      case Op::Idft: {
        ComplexField adj = dft(g);
        double fac = 1.0 / dft_extent(nodes_[n.a].value);
        for (cplx& v : adj.data) v *= fac;
        accum(n.a, std::move(adj));
        break;
      }
      case Op::Fresnel: {
        ComplexField gp = g;
        gp.pitch = nodes_[n.a].value.pitch;
        accum(n.a, fresnel_propagate(gp, -n.z, n.lambda));
        break;
      }
      case Op::Extract:
        accum(n.a, embed_patch(g, n.win, n.host_shape));
        break;
      case Op::Embed:
        accum(n.a, extract_patch(g, n.win));
        break;
      case Op::Project:
        accum(n.a, broadcast_axis(g, n.axis, nodes_[n.a].value.shape[n.axis]));
        break;
      case Op::Hadamard:
        accum_mul_conj(n.a, g, nodes_[n.b].value);
        accum_mul_conj(n.b, g, nodes_[n.a].value);
        break;
      case Op::Add:
        accum(n.a, g);
        accum(n.b, g);
        break;
      case Op::Sub:
        accum(n.a, g);
        accum_scaled(n.b, g, cplx(-1.0, 0.0));
        break;
      case Op::Scale:
        accum_scaled(n.a, g, std::conj(n.factor));
        break;
      case Op::Conj:
        accum(n.a, conj_field(g));
        break;
      case Op::ModulusSq: {
        // complex parent: d f/d z* = (df/du) z; real parent: df/dd = 2 d (df/du)
        double fac = nodes_[n.a].real_valued ? 2.0 : 1.0;
        const ComplexField& v = nodes_[n.a].value;
        ComplexField adj(v.shape);
        for (std::size_t i = 0; i < v.data.size(); ++i)
          adj.data[i] = fac * g.data[i].real() * v.data[i];
        accum(n.a, std::move(adj));
        break;
      }
      case Op::GuardedSqrt: {
        ComplexField adj = real_part(g);
        for (std::size_t k = 0; k < adj.data.size(); ++k)
          adj.data[k] = cplx(adj.data[k].real() * 0.5 / n.value.data[k].real(), 0.0);
        accum(n.a, std::move(adj));
        break;
      }
      case Op::Real: {
        // real parent passes straight through; complex parent gets the
        // Wirtinger half: d Re(a) / d a* = 1/2.
        ComplexField adj = real_part(g);
        if (!nodes_[n.a].real_valued)
          for (cplx& v : adj.data) v *= 0.5;
        accum(n.a, std::move(adj));
        break;
      }
      case Op::Sum: {
        double gs = g.data[0].real();
        accum(n.a, ComplexField(nodes_[n.a].value.shape, cplx(gs, 0.0)));
        break;
      }
    }
  }

  std::vector<ComplexField> grads;
  grads.reserve(leaf_ids_.size());
  for (int id : leaf_ids_) {
    if (bar[id].size() == 0)
      grads.push_back(ComplexField(nodes_[id].value.shape));
    else
      grads.push_back(std::move(bar[id]));
  }
  return grads;
}

GradcheckReport gradcheck(const ProgramBuilder& program, const std::vector<ComplexField>& leaves,
                          double step, double tol) {
  Tape tape;
  program(tape, leaves);
  std::vector<ComplexField> grads = tape.backward();

  auto eval = [&](const std::vector<ComplexField>& pts) {
    Tape t;
    program(t, pts);
    return t.loss();
  };

  GradcheckReport report;
  report.tol = tol;
  std::vector<ComplexField> work = leaves;
  for (std::size_t L = 0; L < leaves.size(); ++L) {
    GradcheckLeafReport lr;
    double gmax = 0.0;
    for (const cplx& v : grads[L].data) gmax = std::max(gmax, std::abs(v));
    for (std::size_t i = 0; i < leaves[L].data.size(); ++i) {
      for (int channel = 0; channel < 2; ++channel) {
        cplx delta = channel == 0 ? cplx(step, 0.0) : cplx(0.0, step);
        work[L].data[i] = leaves[L].data[i] + delta;
        double fp = eval(work);
        work[L].data[i] = leaves[L].data[i] - delta;
        double fm = eval(work);
        work[L].data[i] = leaves[L].data[i];
        double fd = (fp - fm) / (2.0 * step);
        double ad = channel == 0 ? 2.0 * grads[L].data[i].real()
                                 : 2.0 * grads[L].data[i].imag();
        // entries far below the leaf's gradient scale are measured against
        // that scale, so finite-difference roundoff on untouched pixels does
        // not masquerade as a relative error
        double denom = std::max({std::abs(fd), std::abs(ad), gmax * 1e-3, 1e-300});
        lr.max_rel_err = std::max(lr.max_rel_err, std::abs(fd - ad) / denom);
        ++lr.checked;
      }
    }
    report.max_rel_err = std::max(report.max_rel_err, lr.max_rel_err);
    report.per_leaf.push_back(lr);
  }
  report.pass = report.max_rel_err < tol;
  return report;
}

} // namespace ptycho
