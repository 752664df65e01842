#include "pgm/polyline.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>

#include "pgm/io.hpp"

namespace pgm {

namespace {

void check_curve(const PolygonalCurve& Y) {
  if (Y.vertices.rows() < 2)
    throw Error("invariant-violation", "curve needs at least 2 vertices");
  for (Eigen::Index i = 0; i + 1 < Y.vertices.rows(); ++i)
    if ((Y.vertices.row(i) - Y.vertices.row(i + 1)).norm() == 0.0)
      throw Error("invariant-violation",
                  "consecutive vertices " + std::to_string(i) + ", " +
                      std::to_string(i + 1) + " coincide");
}

/// Squared distance from observation `row` to the closed segment [a, b],
/// restricted to the row's present coordinates. Returns the parameter too.
double sqdist_to_segment(const Eigen::MatrixXd& values, const GapMask& gaps,
                         Eigen::Index row, const Eigen::RowVectorXd& a,
                         const Eigen::RowVectorXd& b, double& t_out) {
  double num = 0.0, den = 0.0;
  for (Eigen::Index j = 0; j < values.cols(); ++j) {
    if (gaps(row, j)) continue;
    const double d = b(j) - a(j);
    num += (values(row, j) - a(j)) * d;
    den += d * d;
  }
  const double t = den > 0.0 ? std::clamp(num / den, 0.0, 1.0) : 0.0;
  double acc = 0.0;
  for (Eigen::Index j = 0; j < values.cols(); ++j) {
    if (gaps(row, j)) continue;
    const double foot = a(j) + t * (b(j) - a(j));
    const double d = values(row, j) - foot;
    acc += d * d;
  }
  t_out = t;
  return acc;
}

}  // namespace

double curvature_penalty(const PolygonalCurve& Y, int i, double r) {
  check_curve(Y);
  const int last = static_cast<int>(Y.vertices.rows()) - 1;
  if (i < 0 || i > last) throw Error("invariant-violation", "vertex index out of range");
  if (i == 0) return (Y.vertices.row(0) - Y.vertices.row(1)).squaredNorm();
  if (i == last) return (Y.vertices.row(last) - Y.vertices.row(last - 1)).squaredNorm();
  const Eigen::RowVectorXd u = Y.vertices.row(i - 1) - Y.vertices.row(i);
  const Eigen::RowVectorXd v = Y.vertices.row(i + 1) - Y.vertices.row(i);
  const double nu = u.norm();
  const double nv = v.norm();
  if (nu == 0.0 || nv == 0.0)
    throw Error("zero-length-segment", "cosine undefined at vertex " + std::to_string(i));
  const double c = u.dot(v) / (nu * nv);
  return r * r * (1.0 + c);
}

double polyline_msd(const DataMatrix& X, const PolygonalCurve& Y) {
  if (Y.vertices.cols() != X.cols())
    throw Error("dimension-mismatch", "curve dimension does not match data");
  double acc = 0.0;
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (int s = 0; s < Y.segment_count(); ++s) {
      double t;
      best = std::min(best, sqdist_to_segment(X.values(), X.gaps(), i,
                                              Y.vertices.row(s), Y.vertices.row(s + 1), t));
    }
    acc += X.weights()(i) * best;
  }
  return std::sqrt(acc / X.total_weight());
}

double penalized_error(const DataMatrix& X, const PolygonalCurve& Y, double lambda) {
  const int vertices = static_cast<int>(Y.vertices.rows());
  const double r = data_radius(X);
  double penalty = 0.0;
  for (int i = 0; i < vertices; ++i) penalty += curvature_penalty(Y, i, r);
  return polyline_msd(X, Y) + lambda / static_cast<double>(vertices) * penalty;
}

Partition partition_polyline(const DataMatrix& X, const PolygonalCurve& Y) {
  if (Y.vertices.cols() != X.cols())
    throw Error("dimension-mismatch", "curve dimension does not match data");
  const int k = Y.segment_count();
  const int vcount = k + 1;
  std::vector<int> assignment(static_cast<size_t>(X.rows()), 0);
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    double best_v = std::numeric_limits<double>::infinity();
    int best_vid = 0;
    for (int v = 0; v < vcount; ++v) {
      const double d = gapped_sqdist_to_point(X.values(), X.gaps(), i,
                                              Y.vertices.row(v).transpose());
      if (d < best_v) {
        best_v = d;
        best_vid = v;
      }
    }
    double best_s = std::numeric_limits<double>::infinity();
    int best_sid = -1;
    for (int s = 0; s < k; ++s) {
      double t;
      const double d = sqdist_to_segment(X.values(), X.gaps(), i, Y.vertices.row(s),
                                         Y.vertices.row(s + 1), t);
      if (t > 0.0 && t < 1.0 && d < best_s) {  // open segment: interior feet only
        best_s = d;
        best_sid = s;
      }
    }
    // Vertex wins ties.
    if (best_sid >= 0 && best_s < best_v)
      assignment[static_cast<size_t>(i)] = vcount + best_sid;
    else
      assignment[static_cast<size_t>(i)] = best_vid;
  }
  return make_partition(assignment, 2 * k + 1);
}

namespace {

struct FixedPartitionObjective {
  const DataMatrix& X;
  const Partition& part;
  double lambda;
  double r;

  /// +inf when a segment degenerates (penalty cosine undefined).
  double value(const PolygonalCurve& Y) const {
    const int vcount = static_cast<int>(Y.vertices.rows());
    for (int i = 0; i + 1 < vcount; ++i)
      if ((Y.vertices.row(i) - Y.vertices.row(i + 1)).norm() == 0.0)
        return std::numeric_limits<double>::infinity();

    double acc = 0.0;
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
      const int entity = part.assignment[static_cast<size_t>(i)];
      if (entity < vcount) {
        acc += X.weights()(i) * gapped_sqdist_to_point(X.values(), X.gaps(), i,
                                                       Y.vertices.row(entity).transpose());
      } else {
        const int s = entity - vcount;
        double t;
        acc += X.weights()(i) * sqdist_to_segment(X.values(), X.gaps(), i,
                                                  Y.vertices.row(s),
                                                  Y.vertices.row(s + 1), t);
      }
    }
    const double msd = std::sqrt(acc / X.total_weight());
    double penalty = 0.0;
    for (int i = 0; i < vcount; ++i) penalty += curvature_penalty(Y, i, r);
    return msd + lambda / static_cast<double>(vcount) * penalty;
  }

  Eigen::MatrixXd gradient(const PolygonalCurve& Y) const {
    const int vcount = static_cast<int>(Y.vertices.rows());
    const Eigen::Index m = Y.vertices.cols();
    Eigen::MatrixXd gdata = Eigen::MatrixXd::Zero(vcount, m);

    double acc = 0.0;
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
      const int entity = part.assignment[static_cast<size_t>(i)];
      const double w = X.weights()(i);
      if (entity < vcount) {
        for (Eigen::Index j = 0; j < m; ++j) {
          if (X.gaps()(i, j)) continue;
          const double d = Y.vertices(entity, j) - X.values()(i, j);
          acc += w * d * d;
          gdata(entity, j) += 2.0 * w * d;
        }
      } else {
        const int s = entity - vcount;
        double t;
        acc += w * sqdist_to_segment(X.values(), X.gaps(), i, Y.vertices.row(s),
                                     Y.vertices.row(s + 1), t);
        // Envelope form: the derivative through the foot parameter vanishes.
        for (Eigen::Index j = 0; j < m; ++j) {
          if (X.gaps()(i, j)) continue;
          const double foot =
              Y.vertices(s, j) + t * (Y.vertices(s + 1, j) - Y.vertices(s, j));
          const double d = foot - X.values()(i, j);
          gdata(s, j) += 2.0 * w * (1.0 - t) * d;
          gdata(s + 1, j) += 2.0 * w * t * d;
        }
      }
    }
    const double msd = std::sqrt(acc / X.total_weight());
    Eigen::MatrixXd g = Eigen::MatrixXd::Zero(vcount, m);
    if (msd > 1e-15) g = gdata / (2.0 * msd * X.total_weight());

    const double pref = lambda / static_cast<double>(vcount);
    g.row(0) += pref * 2.0 * (Y.vertices.row(0) - Y.vertices.row(1));
    g.row(1) += pref * 2.0 * (Y.vertices.row(1) - Y.vertices.row(0));
    g.row(vcount - 1) += pref * 2.0 * (Y.vertices.row(vcount - 1) - Y.vertices.row(vcount - 2));
    g.row(vcount - 2) += pref * 2.0 * (Y.vertices.row(vcount - 2) - Y.vertices.row(vcount - 1));
    for (int i = 1; i + 1 < vcount; ++i) {
      const Eigen::RowVectorXd u = Y.vertices.row(i - 1) - Y.vertices.row(i);
      const Eigen::RowVectorXd v = Y.vertices.row(i + 1) - Y.vertices.row(i);
      const double nu = u.norm();
      const double nv = v.norm();
      if (nu == 0.0 || nv == 0.0) continue;
      const double c = u.dot(v) / (nu * nv);
      const Eigen::RowVectorXd dcu = v / (nu * nv) - c * u / (nu * nu);
      const Eigen::RowVectorXd dcv = u / (nu * nv) - c * v / (nv * nv);
      g.row(i - 1) += pref * r * r * dcu;
      g.row(i + 1) += pref * r * r * dcv;
      g.row(i) -= pref * r * r * (dcu + dcv);
    }
    return g;
  }
};

}  // namespace

VertexOptimization optimize_vertices(const DataMatrix& X, const PolygonalCurve& Y,
                                     double lambda, const PolylineParams& params) {
  check_curve(Y);
  const double r = data_radius(X);
  const Partition part = partition_polyline(X, Y);
  FixedPartitionObjective objective{X, part, lambda, r};

  PolygonalCurve current = Y;
  double f = objective.value(current);
  double step = r > 0.0 ? r : 1.0;
  bool any_improvement = false;
  bool done = false;

  for (int iter = 0; iter < params.grad_max_iter && !done; ++iter) {
    const Eigen::MatrixXd g = objective.gradient(current);
    const double gnorm = g.norm();
    if (gnorm < 1e-14) break;

    double alpha = step / gnorm;
    bool moved = false;
    for (int halving = 0; halving < 30; ++halving) {
      PolygonalCurve trial{current.vertices - alpha * g};
      const double ft = objective.value(trial);
      if (ft < f - 1e-12 * std::max(1.0, std::abs(f))) {
        const double improvement = f - ft;
        current = std::move(trial);
        f = ft;
        moved = true;
        any_improvement = true;
        step = alpha * gnorm * 2.0;
        done = improvement < params.grad_tol * std::max(1.0, std::abs(f));
        break;
      }
      alpha *= 0.5;
    }
    if (!moved) break;
  }

  VertexOptimization out;
  out.curve = std::move(current);
  out.improved = any_improvement;
  out.value = penalized_error(X, out.curve, lambda);
  return out;
}

PolylineFit fit_polyline(const DataMatrix& X, const PolylineParams& params,
                         std::mt19937_64& rng) {
  if (X.rows() < 2) throw Error("invariant-violation", "need at least 2 observations");
  const double r = data_radius(X);
  if (r == 0.0) throw Error("invariant-violation", "dataset has zero radius");
  const double n_cbrt = std::cbrt(static_cast<double>(X.rows()));

  const PrincipalComponent pc = fit_first_component(X, rng, params.pca);
  const double lo = pc.scores.minCoeff();
  const double hi = pc.scores.maxCoeff();
  if (hi - lo <= 0.0)
    throw Error("invariant-violation", "no spread along the principal direction");

  PolylineFit fit;
  fit.curve.vertices = Eigen::MatrixXd(2, X.cols());
  fit.curve.vertices.row(0) = (pc.origin + lo * pc.direction).transpose();
  fit.curve.vertices.row(1) = (pc.origin + hi * pc.direction).transpose();

  for (int outer = 0; outer < params.max_outer; ++outer) {
    const int k = fit.curve.segment_count();
    double msd = polyline_msd(X, fit.curve);
    const double lambda =
        params.lambda_prime * static_cast<double>(k) / n_cbrt * (r > 0.0 ? msd / r : 0.0);

    VertexOptimization opt = optimize_vertices(X, fit.curve, lambda, params);
    fit.curve = std::move(opt.curve);
    msd = polyline_msd(X, fit.curve);
    fit.trace.push_back(PolylineRound{k, msd, opt.value, lambda});

    if (msd <= 1e-12 * r) break;  // perfect fit; the stopping ratio diverges
    if (static_cast<double>(k) > params.beta * n_cbrt * r / msd) break;
    if (k >= params.max_segments) break;

    // Insert a vertex at the midpoint of the most loaded segment
    // (segment sets only); ties go to the longest, then the lowest index.
    const Partition part = partition_polyline(X, fit.curve);
    int best_segment = -1;
    int best_count = -1;
    double best_length = -1.0;
    for (int s = 0; s < k; ++s) {
      const int count = part.counts[static_cast<size_t>(k + 1 + s)];
      const double length =
          (fit.curve.vertices.row(s) - fit.curve.vertices.row(s + 1)).norm();
      if (length == 0.0) continue;
      if (count > best_count || (count == best_count && length > best_length)) {
        best_segment = s;
        best_count = count;
        best_length = length;
      }
    }
    if (best_segment < 0) break;  // nothing left to bisect

    Eigen::MatrixXd grown(fit.curve.vertices.rows() + 1, X.cols());
    grown.topRows(best_segment + 1) = fit.curve.vertices.topRows(best_segment + 1);
    grown.row(best_segment + 1) = 0.5 * (fit.curve.vertices.row(best_segment) +
                                         fit.curve.vertices.row(best_segment + 1));
    grown.bottomRows(fit.curve.vertices.rows() - best_segment - 1) =
        fit.curve.vertices.bottomRows(fit.curve.vertices.rows() - best_segment - 1);
    fit.curve.vertices = std::move(grown);
  }
  return fit;
}

void write_polyline(std::ostream& out, const PolygonalCurve& Y) {
  out << "pgm-polyline 1\n";
  out << "vertices " << Y.vertices.rows() << " " << Y.vertices.cols() << "\n";
  for (Eigen::Index i = 0; i < Y.vertices.rows(); ++i) {
    for (Eigen::Index j = 0; j < Y.vertices.cols(); ++j) {
      if (j) out << " ";
      out << format_double(Y.vertices(i, j));
    }
    out << "\n";
  }
}

PolygonalCurve read_polyline(std::istream& in) {
  std::string tag;
  int version = 0;
  in >> tag >> version;
  if (tag != "pgm-polyline" || version != 1)
    throw Error("parse-error", "not a polyline file");
  std::string kw;
  Eigen::Index rows = 0, cols = 0;
  in >> kw >> rows >> cols;
  if (kw != "vertices") throw Error("parse-error", "expected vertices");
  PolygonalCurve Y;
  Y.vertices = Eigen::MatrixXd(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) in >> Y.vertices(i, j);
  if (!in) throw Error("parse-error", "truncated polyline");
  return Y;
}

}  // namespace pgm
