#pragma once

#include <Eigen/Core>

#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace bfc {

/// Boundary part: Gamma1 carries the dynamic-pressure control, Gamma2 the
/// heat-flux control (and no-slip walls).
enum class Part { Gamma1, Gamma2 };
enum class Side { Left, Right, Bottom, Top };

std::string_view to_string(Part p);
std::string_view to_string(Side s);
std::optional<Part> part_from_string(std::string_view s);
std::optional<Side> side_from_string(std::string_view s);

/// One edge of the rectangle's boundary, owned by exactly one cell.
struct BoundaryFace {
  int id = 0;
  Side side = Side::Left;
  int along = 0;       ///< index along its side (j for left/right, i for bottom/top)
  int cell = 0;        ///< adjacent cell
  int inner_cell = 0;  ///< next cell inward along the normal
  Eigen::Vector2d normal = Eigen::Vector2d::Zero();  ///< outward unit normal
  double length = 0.0;
  Eigen::Vector2d center = Eigen::Vector2d::Zero();
  double arclength = 0.0;  ///< counter-clockwise perimeter coordinate from (0,0)
  Part part = Part::Gamma1;
  int normal_dof = 0;  ///< velocity entry holding z.n on this face (up to sign)
};

struct GeometryConfig {
  double Lx = 1.0;
  double Ly = 1.0;
  int nx = 8;
  int ny = 8;
  /// Empty: default split (left/right -> Gamma1, bottom/top -> Gamma2).
  /// Otherwise one label per boundary face in face-id order.
  std::vector<Part> partition;
};

/// Expand per-side labels into a per-face partition vector.
std::vector<Part> partition_by_side(int nx, int ny, Part left, Part right, Part bottom, Part top);

/// Rectangular MAC grid.
///
/// Velocity layout (one flat vector):
///   u(i, r), i = 0..nx, r = 0..ny+1 : x-velocity at x = i*hx. Rows r = 1..ny
///       sit at cell-center heights; rows 0 and ny+1 are tangential samples
///       on the bottom and top walls (at the grid nodes).
///   v(a, j), a = 0..nx+1, j = 0..ny : y-velocity at y = j*hy. Columns 1..nx sit
///       at cell-center abscissae; columns 0 and nx+1 are tangential samples on
///       the left and right walls.
/// Admissible fields have every tangential sample equal to zero and zero
/// normal velocity on Gamma2 faces; the remaining entries are "free".
///
/// Boundary faces are numbered left (bottom to top), right, bottom (left to
/// right), top.
class Domain {
 public:
  explicit Domain(const GeometryConfig& config);

  double Lx() const { return Lx_; }
  double Ly() const { return Ly_; }
  int nx() const { return nx_; }
  int ny() const { return ny_; }
  double hx() const { return hx_; }
  double hy() const { return hy_; }
  double area() const { return Lx_ * Ly_; }

  int num_cells() const { return nx_ * ny_; }
  int num_nodes() const { return (nx_ + 1) * (ny_ + 1); }
  int num_u() const { return (nx_ + 1) * (ny_ + 2); }
  int num_velocity() const { return num_u() + (nx_ + 2) * (ny_ + 1); }

  int cell_index(int i, int j) const { return i * ny_ + j; }
  int node_index(int i, int j) const { return i * (ny_ + 1) + j; }
  int u_index(int i, int r) const { return i * (ny_ + 2) + r; }
  int v_index(int a, int j) const { return num_u() + a * (ny_ + 1) + j; }

  /// x of u column i / node column i.
  double node_x(int i) const { return i * hx_; }
  double node_y(int j) const { return j * hy_; }
  /// y of u row r (0 and ny+1 are the walls).
  double u_row_y(int r) const;
  /// x of v column a (0 and nx+1 are the walls).
  double v_col_x(int a) const;
  Eigen::Vector2d cell_center(int i, int j) const { return {(i + 0.5) * hx_, (j + 0.5) * hy_}; }
  Eigen::Vector2d velocity_position(int idx) const;
  bool is_u(int idx) const { return idx < num_u(); }

  /// Trapezoidal dual-cell weights along x for node/u columns, along y for node/v rows.
  double dual_wx(int i) const { return (i == 0 || i == nx_) ? 0.5 * hx_ : hx_; }
  double dual_wy(int j) const { return (j == 0 || j == ny_) ? 0.5 * hy_ : hy_; }
  double node_weight(int i, int j) const { return dual_wx(i) * dual_wy(j); }
  double cell_weight() const { return hx_ * hy_; }

  /// Midpoint-quadrature weight of a velocity entry (0 for tangential samples).
  double velocity_weight(int idx) const { return velocity_weight_[idx]; }
  const Eigen::VectorXd& velocity_weights() const { return velocity_weight_; }
  bool velocity_free(int idx) const { return free_[idx] != 0; }
  const std::vector<char>& velocity_free_mask() const { return free_; }
  /// Free velocity entries in ascending order.
  const std::vector<int>& free_dofs() const { return free_dofs_; }

  const std::vector<BoundaryFace>& faces() const { return faces_; }
  const std::vector<int>& part_faces(Part p) const { return p == Part::Gamma1 ? gamma1_ : gamma2_; }
  int part_size(Part p) const { return static_cast<int>(part_faces(p).size()); }
  double part_length(Part p) const;

 private:
  double Lx_, Ly_;
  int nx_, ny_;
  double hx_, hy_;
  std::vector<BoundaryFace> faces_;
  std::vector<int> gamma1_, gamma2_;
  std::vector<char> free_;
  std::vector<int> free_dofs_;
  Eigen::VectorXd velocity_weight_;
};

/// Validates and builds the domain; throws ValidationError on nx, ny < 4,
/// non-positive lengths, a malformed partition or an empty Gamma2.
Domain build_domain(const GeometryConfig& config);

struct VelocityField {
  Eigen::VectorXd values;
};

struct ScalarField {
  Eigen::VectorXd values;
};

/// Values at the (nx+1) x (ny+1) grid nodes.
struct NodeField {
  Eigen::VectorXd values;
};

/// Piecewise-constant data on the faces of one boundary part, optionally per
/// time slot. Stored time-major: values[t * num_faces + k] where k indexes
/// Domain::part_faces(part).
struct BoundaryFunction {
  Part part = Part::Gamma1;
  int num_faces = 0;
  int num_times = 1;
  Eigen::VectorXd values;

  double at(int t, int k) const { return values[t * num_faces + k]; }
  double& at(int t, int k) { return values[t * num_faces + k]; }
  /// Like at(), but a single time slot is broadcast to every t.
  double get(int t, int k) const { return at(num_times == 1 ? 0 : t, k); }
  /// Face values of slot t (broadcast when num_times == 1).
  Eigen::VectorXd slot(int t) const {
    return values.segment(static_cast<Eigen::Index>(num_times == 1 ? 0 : t) * num_faces, num_faces);
  }

  static BoundaryFunction constant(const Domain& d, Part part, int num_times, double value);
  /// Per-face value from f(face), replicated over time slots.
  static BoundaryFunction from_faces(const Domain& d, Part part, int num_times,
                                     const std::function<double(const BoundaryFace&)>& f);
};

using VectorFunction = std::function<double(double x, double y)>;

VelocityField zero_velocity(const Domain& d);
ScalarField zero_scalar(const Domain& d);
/// Samples (fu, fv) at every velocity position, boundary samples included.
VelocityField sample_velocity(const Domain& d, const VectorFunction& fu, const VectorFunction& fv);
ScalarField sample_scalar(const Domain& d, const VectorFunction& f);
/// Zeroes tangential samples and Gamma2 normal entries.
void apply_velocity_constraints(const Domain& d, VelocityField& z);
/// Divergence-free field from a node streamfunction psi (u = dpsi/dy, v = -dpsi/dx).
VelocityField from_streamfunction(const Domain& d, const VectorFunction& psi);

ScalarField divergence(const VelocityField& z, const Domain& d);
/// Node vorticity dv/dx - du/dy. Boundary nodes use the stored tangential
/// samples, so admissible fields get the no-tangential-slip closure.
NodeField curl2d(const VelocityField& z, const Domain& d);
/// Per-face z.n on the given part.
BoundaryFunction normal_trace(const VelocityField& z, Part part, const Domain& d);
/// Face-normal gradient of a cell field; boundary faces use the supplied
/// per-face boundary values (all faces, id order), or zero when empty.
VelocityField gradient(const ScalarField& phi, const Domain& d, const Eigen::VectorXd& boundary_values = {});

double inner_product(const VelocityField& a, const VelocityField& b, const Domain& d);
double inner_product(const ScalarField& a, const ScalarField& b, const Domain& d);
/// Spatial integral over the part of f*g at time slot t.
double boundary_integral(const BoundaryFunction& f, const BoundaryFunction& g, const Domain& d, int t = 0);

void check_shape(const VelocityField& z, const Domain& d);
void check_shape(const ScalarField& w, const Domain& d);
void check_shape(const BoundaryFunction& f, const Domain& d);

}  // namespace bfc
