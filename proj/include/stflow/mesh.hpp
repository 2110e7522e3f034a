#pragma once

// Spatial six-patch C-mesh around a symmetric NACA section, prescribed rigid
// motion, and the periodic space-time extrusion used by the solver.

#include <array>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "stflow/nurbs.hpp"

namespace stflow {

// ---------------------------------------------------------------- NACA foil

struct NacaSection {
  double thickness = 0.12;  // t/c
};

// Accepts four digits; only symmetric sections ("00xx") are supported.
NacaSection parse_naca(const std::string& code);

// Half thickness y_t(x) for 0 <= x <= c (closed trailing edge).
double naca_half_thickness(const NacaSection& s, double chord, double x);

// ------------------------------------------------------------ spatial mesh

struct SpatialMeshSpec {
  std::string naca = "0012";
  double chord = 1.0;
  double inflow_radius = 8.0;     // C-arc radius, centred on the nose/tail split
  double outflow_distance = 8.0;  // outflow plane distance behind the trailing edge
  double split_fraction = 0.15;   // nose/tail patch split along the chord
  double flare_deg = 8.0;         // top/bottom boundaries open up by this angle
  int degree = 2;
  int level = 0;  // > 0: uniform knot bisection; < 0: counts halved per step
  // level-0 element counts
  int n_nose = 10;
  int n_tail = 20;
  int n_wake = 45;
  int n_radial = 15;
  double radial_stretch = 5.5;  // exponential clustering towards the foil / wake line
  double wake_stretch = 2.4;    // exponential clustering towards the trailing edge
};

enum class SideKind { Interface, Interior, Exterior };

// Patch side numbering: 0 -> u=0, 1 -> u=1, 2 -> v=0, 3 -> v=1.
struct SpatialMesh {
  std::vector<nurbs::NurbsPatch> patches;
  std::vector<std::string> patch_names;
  std::vector<std::array<SideKind, 4>> sides;
  std::vector<std::vector<int>> cp_map;  // patch-local control point -> global id
  std::vector<double> cp_xy;             // 2 per global control point
  std::vector<double> cp_w;
  double chord = 1.0;
  std::string naca;
  int degree = 2;

  int num_cps() const { return static_cast<int>(cp_w.size()); }
};

SpatialMesh build_spatial_mesh(const SpatialMeshSpec& spec);

// Merges patch control points by coordinate (tolerance 1e-10) and fills cp_map.
void merge_control_points(SpatialMesh& mesh, double tol = 1e-10);

// ------------------------------------------------------------------ motion

enum class MotionKind { Stationary, Heave, Pitch };

struct MotionSpec {
  MotionKind kind = MotionKind::Stationary;
  double heave_amplitude = 0.0;     // h_a (length)
  double pitch_amplitude_deg = 0.0;  // alpha_a
  double period = 1.0;               // T
  double pitch_axis = 1.0 / 3.0;     // chord fraction, axis at (pitch_axis * c, 0)
  double chord = 1.0;

  void validate() const;
  // Rigid map x -> R(t)(x - x_a) + x_a + d(t).
  Eigen::Vector2d apply(const Eigen::Vector2d& x, double t) const;
  Eigen::Vector2d velocity(const Eigen::Vector2d& x, double t) const;
  double heave(double t) const;
  double pitch_angle(double t) const;  // radians
};

// ---------------------------------------------------------- temporal basis

enum class TemporalKind { Steady, OpenC0, Periodic };

// Basis in the time direction. OpenC0 uses an open knot vector whose first and
// last control levels are identified; Periodic uses a uniform C^{p-1}
// periodic spline; Steady has a single constant function.
struct TemporalBasis {
  TemporalKind kind = TemporalKind::OpenC0;
  int degree = 2;
  int n_el = 1;
  nurbs::KnotVector kv;  // empty for Steady

  static TemporalBasis make(TemporalKind kind, int n_el, int degree);

  int num_levels() const;   // geometric control levels
  int num_leaders() const;  // independent coefficient levels
  int leader(int level) const;
  int num_local() const { return kind == TemporalKind::Steady ? 1 : degree + 1; }
  int level(int span, int j) const;
  double span_begin(int span) const;  // global parameter in [0,1]
  double span_end(int span) const;
  // Values and derivatives (w.r.t. the global parameter) of the local functions.
  void eval(int span, double xi_global, double* N, double* dN) const;
  // Parameters at which the motion is sampled, one per geometric level.
  std::vector<double> sample_params() const;
};

// -------------------------------------------------------- space-time mesh

enum class FaceTag { Interior, Dirichlet, Neumann, Initial, Final };
const char* to_string(FaceTag tag);

struct SpatialElement {
  int patch = 0;
  int span_u = 0;  // knot span indices in the patch knot vectors
  int span_v = 0;
  double u0 = 0, u1 = 1, v0 = 0, v1 = 1;
  std::vector<int> cps;  // (p+1)^2 global ids, u fastest
};

// Spatial boundary edge; extruded over every temporal span.
struct BoundaryEdge {
  int sp_elem = 0;
  int side = 0;
  FaceTag tag = FaceTag::Interior;
};

struct FaceRef {
  int edge = -1;  // index into edges; -1 for temporal faces
  int t_span = 0;
  int sp_elem = 0;  // for temporal faces
  FaceTag tag = FaceTag::Interior;
};

inline constexpr int kMaxLocal = 64;

struct PointEval {
  int nb = 0;
  std::array<double, kMaxLocal> N{};
  std::array<std::array<double, 3>, kMaxLocal> dN{};  // physical gradient in xhat
  std::array<double, kMaxLocal> lapN{};                // spatial Laplacian
  Eigen::Matrix3d J;     // d xhat / d xi (element-local parameters)
  Eigen::Matrix3d Jinv;  // d xi / d xhat
  double detJ = 0;
  Eigen::Vector3d xhat;
  Eigen::Matrix3d Ghat;
  Eigen::Matrix2d G;
};

struct FaceEval {
  Eigen::Vector3d nhat;  // unit space-time normal (outward)
  Eigen::Vector2d n;     // unit spatial normal
  double vn = 0;         // normal boundary velocity
  Eigen::Vector2d g;     // mesh boundary velocity dx/dt at fixed spatial parameter
  double dsigma = 0;     // dl * s dt per unit local face parameter area
};

struct MetricPair {
  Eigen::Matrix3d Ghat;
  Eigen::Matrix2d G;
  double G_dot_G = 0;
  double trace_G = 0;
  double detJ = 0;
};

class SpaceTimeMesh {
 public:
  SpatialMesh spatial;
  MotionSpec motion;
  TemporalBasis time;
  double s = 1.0;
  double period = 1.0;  // T (1 for steady meshes)
  std::vector<SpatialElement> sp_elems;
  std::vector<BoundaryEdge> edges;
  std::vector<std::vector<double>> level_xy;  // [level][2 * cp]

  int degree() const { return spatial.degree; }
  int num_cps() const { return spatial.num_cps(); }
  int num_t_spans() const { return time.kind == TemporalKind::Steady ? 1 : time.n_el; }
  int num_elements() const { return static_cast<int>(sp_elems.size()) * num_t_spans(); }
  int sp_elem_of(int e) const { return e % static_cast<int>(sp_elems.size()); }
  int t_span_of(int e) const { return e / static_cast<int>(sp_elems.size()); }
  int num_local() const {
    return (spatial.degree + 1) * (spatial.degree + 1) * time.num_local();
  }
  bool steady() const { return time.kind == TemporalKind::Steady; }

  // Leader coefficient index (leader_level * num_cps + cp) of each local function.
  void local_nodes(int e, int* nodes) const;
  int num_nodes() const { return time.num_leaders() * num_cps(); }

  // Evaluation at element-local parameters xi in [0,1]^3.
  void eval_point(int e, const double* xi, PointEval& out, bool hessian = true) const;
  // Face quantities; xi lies on the face (the side coordinate is 0 or 1).
  void eval_face(int edge, int t_span, const double* xi, PointEval& pe, FaceEval& fe) const;
  // Face parameter (a, b) in [0,1]^2 -> element-local xi for an edge.
  void face_to_local(int edge, double a, double b, double* xi) const;

  // Temporal span and local coordinate of time t in [0, T] (clamped).
  std::pair<int, double> locate_time(double t) const;

  // All boundary faces including the temporal end faces.
  std::vector<FaceRef> faces() const;
  double spatial_area(double t) const;
  double interior_boundary_length(double t) const;

  void dump(std::ostream& os) const;
};

struct TemporalSpec {
  TemporalKind kind = TemporalKind::OpenC0;
  int n_el = 2;
  int degree = 2;
};

SpaceTimeMesh build_spacetime_mesh(const SpatialMesh& spatial, const MotionSpec& motion,
                                   const TemporalSpec& temporal, double s = 1.0,
                                   const Eigen::Vector2d& free_stream = Eigen::Vector2d(1.0, 0.0));

// Steady (2D) mesh: a single constant temporal function on [0,1].
SpaceTimeMesh build_steady_mesh(const SpatialMesh& spatial,
                                const Eigen::Vector2d& free_stream = Eigen::Vector2d(1.0, 0.0));

// Exterior faces with free-stream flux < 0 become Dirichlet, otherwise Neumann.
// Evaluated in the reference configuration (t = 0).
void classify_exterior(SpaceTimeMesh& mesh, const Eigen::Vector2d& free_stream);

MetricPair compute_metrics(const SpaceTimeMesh& mesh, int element, const double* xi);

struct BoundaryNormal {
  Eigen::Vector3d nhat;
  Eigen::Vector2d n;
  double vn = 0;
};
// Throws StructureError on temporal faces (v_n undefined).
BoundaryNormal boundary_normal(const SpaceTimeMesh& mesh, const FaceRef& face, const double* xi_face);
// Only for faces on the interior boundary.
Eigen::Vector2d mesh_boundary_velocity(const SpaceTimeMesh& mesh, const FaceRef& face,
                                       const double* xi_face);

// Space-time normal -> (spatial normal, v_n).
BoundaryNormal split_normal(const Eigen::Vector3d& nhat, double s);

}  // namespace stflow
