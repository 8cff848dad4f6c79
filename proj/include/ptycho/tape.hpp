#pragma once
#include <array>
#include <functional>
#include <string>
#include <vector>

#include "ptycho/field.hpp"
#include "ptycho/kernels.hpp"

namespace ptycho {

// Elementary op tags recorded on the tape.
enum class Op : std::uint8_t {
  Var,        // marked differentiable leaf (complex)
  Const,      // non-differentiable leaf
  Dft,
  Idft,
  Fresnel,
  Extract,
  Embed,
  Project,
  Hadamard,
  Add,
  Sub,
  Scale,
  Conj,
  ModulusSq,  // complex -> real (or real -> elementwise square)
  GuardedSqrt,// real -> real, sqrt(h + eps)
  Real,       // complex -> real part
  Sum,        // real -> real scalar
};

const char* op_name(Op op);

// Reverse-mode AD over ComplexField programs. Forward values are computed and
// cached as nodes are pushed (the forward pass); backward() runs once over the
// finished tape and accumulates Wirtinger adjoints df/dv* toward the marked
// leaves. Real-valued intermediates (intensities, square roots, the loss)
// live in the same complex storage with zero imaginary part and carry plain
// real derivatives; the non-holomorphic boundary ops (ModulusSq, GuardedSqrt,
// Sum) translate between the two conventions so that leaf gradients satisfy
// grad = d f / d z* = (df/dRe z + i df/dIm z) / 2.
class Tape {
public:
  struct Node {
    Op op;
    int a = -1, b = -1;
    ComplexField value;
    bool real_valued = false;
    // op-specific constants
    PatchWindow win;
    Shape host_shape;
    std::size_t axis = 0;
    double z = 0.0, lambda = 0.0;
    cplx factor{1.0, 0.0};
    double guard_eps = kSqrtGuard;
  };

  int var(ComplexField v);
  int constant(ComplexField v, bool real_valued = false);
  int constant_real(const RealField& v);

  int dft_(int a);
  int idft_(int a);
  int fresnel_(int a, double z, double lambda);
  int extract_(int a, const PatchWindow& w);
  int embed_(int a, const PatchWindow& w, const Shape& host_shape);
  int project_(int a, std::size_t axis);
  int hadamard_(int a, int b);
  int add_(int a, int b);
  int sub_(int a, int b);
  int scale_(int a, cplx factor);
  int conj_(int a);
  int modulus_sq_(int a);
  int guarded_sqrt_(int a, double eps = kSqrtGuard);
  int real_(int a);
  int sum_(int a);

  const Node& node(int id) const { return nodes_[id]; }
  std::size_t size() const { return nodes_.size(); }
  const std::vector<int>& leaves() const { return leaf_ids_; }

  // Terminal scalar value; the last pushed node must be a real scalar.
  double loss() const;

  // One backward sweep; returns df/dz* per marked leaf, in var() order.
  std::vector<ComplexField> backward() const;

private:
  int push(Node n);
  std::vector<Node> nodes_;
  std::vector<int> leaf_ids_;
};

// Loss programs are expressed as builders so finite differences can re-run
// them at perturbed leaves. The builder marks each leaf with tape.var() in
// the order the leaves are supplied.
using ProgramBuilder = std::function<void(Tape&, const std::vector<ComplexField>&)>;

struct GradcheckLeafReport {
  double max_rel_err = 0.0;
  std::size_t checked = 0;
};

struct GradcheckReport {
  std::vector<GradcheckLeafReport> per_leaf;
  double max_rel_err = 0.0;
  double tol = 0.0;
  bool pass = false;
};

// Central finite differences on the real and imaginary channels of every leaf
// entry, compared against 2*Re / 2*Im of the AD Wirtinger gradient.
GradcheckReport gradcheck(const ProgramBuilder& program, const std::vector<ComplexField>& leaves,
                          double step = 1e-6, double tol = 1e-5);

} // namespace ptycho
