#include "pgm/cli.hpp"

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <map>
#include <optional>
#include <sstream>

#include "pgm/complex.hpp"
#include "pgm/dataset.hpp"
#include "pgm/elastic_map.hpp"
#include "pgm/grammar.hpp"
#include "pgm/io.hpp"
#include "pgm/kmeans.hpp"
#include "pgm/layout.hpp"
#include "pgm/pca.hpp"
#include "pgm/polyline.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace pgm::cli {

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("io-error", "cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("io-error", "cannot write '" + path.string() + "'");
  out << content;
}

/// Artifacts are staged in memory and flushed together so a failed run
/// leaves no partial output directory behind.
struct RunOutput {
  fs::path dir;
  std::map<std::string, std::string> files;
  json manifest;

  void flush() {
    fs::create_directories(dir);
    files["manifest.json"] = manifest.dump(2) + "\n";
    for (const auto& [name, content] : files) write_file(dir / name, content);
  }
};

struct TableArgs {
  std::string path;
  std::string delimiter = ",";
  std::string gap_token = "NA";
  bool header = false;
  int weight_col = -1;
  int label_col = -1;
};

void add_table_options(CLI::App* cmd, TableArgs& args) {
  cmd->add_option("--input", args.path, "delimited input file")->required();
  cmd->add_option("--delimiter", args.delimiter, "cell delimiter (',' or 'tab')");
  cmd->add_option("--gap-token", args.gap_token, "token marking a missing value");
  cmd->add_flag("--header", args.header, "first line holds column names");
  cmd->add_option("--weight-col", args.weight_col, "zero-based weight column");
  cmd->add_option("--label-col", args.label_col, "zero-based class label column");
}

struct LoadedInput {
  LoadedTable table;
  std::string hash;
};

LoadedInput load_input(const TableArgs& args) {
  const std::string bytes = read_file(args.path);
  TableOptions options;
  options.delimiter = args.delimiter == "tab" || args.delimiter == "\\t"
                          ? '\t'
                          : (args.delimiter.empty() ? ',' : args.delimiter[0]);
  options.gap_token = args.gap_token;
  options.header = args.header;
  if (args.weight_col >= 0) options.weight_column = args.weight_col;
  if (args.label_col >= 0) options.label_column = args.label_col;
  std::istringstream in(bytes);
  return LoadedInput{load_table(in, options), fnv1a_hex(bytes)};
}

json table_manifest(const TableArgs& args) {
  return json{{"input", args.path},
              {"delimiter", args.delimiter},
              {"gap_token", args.gap_token},
              {"header", args.header},
              {"weight_col", args.weight_col},
              {"label_col", args.label_col}};
}

json energy_json(const EnergyBreakdown& e) {
  return json{{"data_term", e.data_term},
              {"stretch", e.stretch},
              {"bending", e.bending},
              {"total", e.total()}};
}

std::string matrix_tsv(const Eigen::MatrixXd& m,
                       const std::vector<std::string>& header = {}) {
  std::ostringstream out;
  if (!header.empty()) {
    for (size_t j = 0; j < header.size(); ++j) {
      if (j) out << "\t";
      out << header[j];
    }
    out << "\n";
  }
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j) out << "\t";
      out << format_double(m(i, j));
    }
    out << "\n";
  }
  return out.str();
}

// --- model files -----------------------------------------------------------

std::string pca_model_text(const PcaBasis& basis) {
  std::ostringstream out;
  out << "pgm-pca 1\n";
  out << "dim " << basis.origin.size() << " components " << basis.count() << "\n";
  out << "complete " << (basis.complete ? 1 : 0) << " converged "
      << (basis.converged ? 1 : 0) << "\n";
  out << "origin";
  for (Eigen::Index j = 0; j < basis.origin.size(); ++j)
    out << " " << format_double(basis.origin(j));
  out << "\n";
  for (int c = 0; c < basis.count(); ++c) {
    out << "component " << format_double(basis.eigenvalues(c));
    for (Eigen::Index j = 0; j < basis.origin.size(); ++j)
      out << " " << format_double(basis.components(j, c));
    out << "\n";
  }
  return out.str();
}

PcaBasis read_pca_model(std::istream& in) {
  std::string tag, kw;
  int version = 0;
  in >> tag >> version;
  if (tag != "pgm-pca" || version != 1) throw Error("parse-error", "not a pca model");
  Eigen::Index m = 0;
  int k = 0, complete = 0, converged = 0;
  in >> kw >> m;
  if (kw != "dim") throw Error("parse-error", "expected dim");
  in >> kw >> k;
  if (kw != "components") throw Error("parse-error", "expected components");
  in >> kw >> complete >> kw >> converged;
  PcaBasis basis;
  basis.requested = k;
  basis.complete = complete != 0;
  basis.converged = converged != 0;
  basis.origin = Eigen::VectorXd(m);
  in >> kw;
  if (kw != "origin") throw Error("parse-error", "expected origin");
  for (Eigen::Index j = 0; j < m; ++j) in >> basis.origin(j);
  basis.components = Eigen::MatrixXd(m, k);
  basis.eigenvalues = Eigen::VectorXd(k);
  for (int c = 0; c < k; ++c) {
    in >> kw >> basis.eigenvalues(c);
    if (kw != "component") throw Error("parse-error", "expected component");
    for (Eigen::Index j = 0; j < m; ++j) in >> basis.components(j, c);
  }
  if (!in) throw Error("parse-error", "truncated pca model");
  return basis;
}

std::string centroids_model_text(const Centroids& Y) {
  std::ostringstream out;
  out << "pgm-centroids 1\n";
  write_positions(out, Y);
  return out.str();
}

std::string tree_model_text(const ElasticGraph& G, const Embedding& phi) {
  std::ostringstream out;
  out << "pgm-tree 1\n";
  write_graph(out, G);
  write_positions(out, phi);
  return out.str();
}

std::pair<ElasticGraph, Embedding> read_tree_model(std::istream& in) {
  std::string tag;
  int version = 0;
  in >> tag >> version;
  if (tag != "pgm-tree" || version != 1) throw Error("parse-error", "not a tree model");
  ElasticGraph G = read_graph(in);
  Embedding phi = read_positions(in);
  if (phi.rows() != G.vertex_count())
    throw Error("parse-error", "positions do not cover the graph");
  return {std::move(G), std::move(phi)};
}

std::string vertex_projection_tsv(const DataMatrix& X, const Embedding& phi) {
  const Partition part = partition_by_vertices(X, phi);
  std::ostringstream out;
  out << "index\tvertex\tdistance\n";
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    const int v = part.assignment[static_cast<size_t>(i)];
    const double d = std::sqrt(
        gapped_sqdist_to_point(X.values(), X.gaps(), i, phi.row(v).transpose()));
    out << i << "\t" << v << "\t" << format_double(d) << "\n";
  }
  return out.str();
}

std::string growth_log_text(const std::vector<GrowthRecord>& log) {
  std::ostringstream out;
  write_growth_log(out, log);
  return out.str();
}

std::string energy_trace_tsv(const std::vector<GrowthRecord>& log) {
  std::ostringstream out;
  out << "round\top\tsite\tsc\tdata_term\tstretch\tbending\ttotal\tvertices\n";
  for (const auto& r : log) {
    out << r.round << "\t" << grammar_op_name(r.op) << "\t" << r.site << "\t"
        << format_double(r.sc) << "\t" << format_double(r.energy.data_term) << "\t"
        << format_double(r.energy.stretch) << "\t" << format_double(r.energy.bending)
        << "\t" << format_double(r.energy.total()) << "\t" << r.vertex_count << "\n";
  }
  return out.str();
}

// --- subcommand states -----------------------------------------------------

struct IngestTableCmd {
  TableArgs table;
  std::string out;
};

struct IngestTripletsCmd {
  std::string fasta;
  int width = 300;
  int fragments = 5000;
  uint64_t seed = 0;
  std::string out;
};

struct FitPcaCmd {
  TableArgs table;
  int k = 2;
  uint64_t seed = 0;
  double eps = 1e-9;
  int max_iter = 1000;
  std::string out;
};

struct FitKmeansCmd {
  TableArgs table;
  int k = 2;
  uint64_t seed = 0;
  std::string seeding = "kmeans++";
  int max_iter = 200;
  std::string out;
};

struct FitMapCmd {
  TableArgs table;
  std::vector<int> shape;
  std::string topology;  // empty: from shape size
  double lambda0 = 0.01;
  double mu0 = 0.1;
  std::vector<double> schedule{1e3, 1e2, 10.0, 1.0};
  double tol = 1e-8;
  int max_iter = 100;
  uint64_t seed = 0;
  std::string out;
};

struct FitTreeCmd {
  TableArgs table;
  int nodes = 50;
  int branch_cap = -1;  // >= 0 switches to the branch SC policy
  int cc_max = 10000;
  double lambda = 0.01;
  double mu = 0.1;
  std::string grammars = "grow,grow,shrink";
  int candidate_iters = 20;
  uint64_t seed = 0;
  std::string out;
};

struct FitPolylineCmd {
  TableArgs table;
  double lambda_prime = 0.13;
  double beta = 0.3;
  int max_segments = 200;
  uint64_t seed = 0;
  std::string out;
};

struct FitComplexCmd {
  TableArgs table;
  int factors = 2;
  int nodes_per_factor = 5;
  int cc_max = 10000;
  double lambda = 0.01;
  double mu = 0.1;
  uint64_t seed = 0;
  std::string out;
};

struct ProjectCmd {
  std::string model;
  TableArgs table;
  std::string out;
};

struct LayoutCmd {
  std::string model;
  TableArgs table;
  uint64_t seed = 0;
  bool local_plane = false;
  std::string out;
};

struct ReportCmd {
  std::string run_dir;
};

std::vector<Grammar> parse_grammar_sequence(const std::string& text) {
  std::vector<Grammar> sequence;
  std::istringstream ss(text);
  std::string name;
  while (std::getline(ss, name, ',')) {
    if (name == "grow")
      sequence.push_back(grow_grammar());
    else if (name == "shrink")
      sequence.push_back(shrink_grammar());
    else
      throw Error("parse-error", "unknown grammar '" + name + "' (grow|shrink)");
  }
  if (sequence.empty()) throw Error("parse-error", "empty grammar sequence");
  return sequence;
}

// --- handlers ---------------------------------------------------------------

void run_ingest_table(const IngestTableCmd& cmd) {
  LoadedInput input = load_input(cmd.table);
  const DataMatrix& X = input.table.data;

  std::ostringstream data;
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    for (Eigen::Index j = 0; j < X.cols(); ++j) {
      if (j) data << "\t";
      if (X.gaps()(i, j))
        data << cmd.table.gap_token;
      else
        data << format_double(X.values()(i, j));
    }
    data << "\n";
  }

  RunOutput out{cmd.out, {}, {}};
  out.files["data.tsv"] = data.str();
  if (!input.table.labels.empty()) {
    std::ostringstream labels;
    for (const auto& l : input.table.labels) labels << l << "\n";
    out.files["labels.txt"] = labels.str();
  }
  std::ostringstream weights;
  for (Eigen::Index i = 0; i < X.rows(); ++i)
    weights << format_double(X.weights()(i)) << "\n";
  out.files["weights.txt"] = weights.str();

  out.manifest = json{{"command", "ingest table"},
                      {"version", kVersion},
                      {"input_hash", input.hash},
                      {"options", table_manifest(cmd.table)},
                      {"rows", X.rows()},
                      {"cols", X.cols()}};
  out.flush();
}

void run_ingest_triplets(const IngestTripletsCmd& cmd) {
  const std::string bytes = read_file(cmd.fasta);
  std::istringstream in(bytes);
  const std::string sequence = read_fasta(in);
  std::mt19937_64 rng(cmd.seed);
  DataMatrix X = triplet_frequencies(sequence, cmd.width, cmd.fragments, rng);

  std::vector<std::string> header;
  for (int t = 0; t < 64; ++t) header.push_back(triplet_name(t));

  RunOutput out{cmd.out, {}, {}};
  out.files["data.tsv"] = matrix_tsv(X.values(), header);
  out.manifest = json{{"command", "ingest triplets"},
                      {"version", kVersion},
                      {"input_hash", fnv1a_hex(bytes)},
                      {"options",
                       json{{"fasta", cmd.fasta},
                            {"width", cmd.width},
                            {"fragments", cmd.fragments}}},
                      {"seed", cmd.seed},
                      {"sequence_length", sequence.size()}};
  out.flush();
}

void run_fit_pca(const FitPcaCmd& cmd) {
  LoadedInput input = load_input(cmd.table);
  const DataMatrix& X = input.table.data;
  std::mt19937_64 rng(cmd.seed);
  PcaParams params;
  params.eps = cmd.eps;
  params.max_iter = cmd.max_iter;
  PcaBasis basis = fit_components(X, cmd.k, rng, params);
  Eigen::MatrixXd coords = project_to_basis(X, basis);

  std::vector<std::string> header;
  for (int c = 0; c < basis.count(); ++c) header.push_back("beta_" + std::to_string(c));

  json variance;
  double total = 0.0;
  for (int c = 0; c < basis.count(); ++c) total += basis.eigenvalues(c);
  variance["eigenvalues"] = std::vector<double>(
      basis.eigenvalues.data(), basis.eigenvalues.data() + basis.count());
  variance["captured_variance"] = total;
  variance["complete"] = basis.complete;
  variance["converged"] = basis.converged;

  RunOutput out{cmd.out, {}, {}};
  out.files["pca_model.txt"] = pca_model_text(basis);
  out.files["projections.tsv"] = matrix_tsv(coords, header);
  out.files["variance_report.json"] = variance.dump(2) + "\n";
  out.manifest = json{{"command", "fit pca"},
                      {"version", kVersion},
                      {"input_hash", input.hash},
                      {"options", table_manifest(cmd.table)},
                      {"k", cmd.k},
                      {"eps", cmd.eps},
                      {"max_iter", cmd.max_iter},
                      {"seed", cmd.seed}};
  out.flush();
}

void run_fit_kmeans(const FitKmeansCmd& cmd) {
  LoadedInput input = load_input(cmd.table);
  const DataMatrix& X = input.table.data;
  std::mt19937_64 rng(cmd.seed);
  const Seeding seeding = cmd.seeding == "uniform" ? Seeding::uniform
                                                   : Seeding::kmeanspp;
  if (cmd.seeding != "uniform" && cmd.seeding != "kmeans++")
    throw Error("parse-error", "seeding must be kmeans++ or uniform");
  KmeansResult result = fit_kmeans(X, cmd.k, seeding, rng, cmd.max_iter);

  std::ostringstream assignments;
  assignments << "index\tcluster\tdistance\n";
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    const int c = result.partition.assignment[static_cast<size_t>(i)];
    assignments << i << "\t" << c << "\t"
                << format_double(std::sqrt(gapped_sqdist_to_point(
                       X.values(), X.gaps(), i, result.centroids.row(c).transpose())))
                << "\n";
  }
  std::ostringstream trace;
  trace << "step\tdistortion\n";
  for (size_t t = 0; t < result.distortion_trace.size(); ++t)
    trace << t << "\t" << format_double(result.distortion_trace[t]) << "\n";

  RunOutput out{cmd.out, {}, {}};
  out.files["kmeans_model.txt"] = centroids_model_text(result.centroids);
  out.files["assignments.tsv"] = assignments.str();
  out.files["distortion_trace.tsv"] = trace.str();
  out.manifest = json{{"command", "fit kmeans"},
                      {"version", kVersion},
                      {"input_hash", input.hash},
                      {"options", table_manifest(cmd.table)},
                      {"k", cmd.k},
                      {"seeding", cmd.seeding},
                      {"max_iter", cmd.max_iter},
                      {"iterations", result.iterations},
                      {"converged", result.converged},
                      {"final_distortion", result.distortion_trace.back()},
                      {"seed", cmd.seed}};
  out.flush();
}

void run_fit_map(const FitMapCmd& cmd) {
  LoadedInput input = load_input(cmd.table);
  const DataMatrix& X = input.table.data;
  if (cmd.shape.empty()) throw Error("parse-error", "--shape is required");
  NetTopology topology;
  if (!cmd.topology.empty())
    topology = net_topology_from_name(cmd.topology);
  else
    topology = cmd.shape.size() == 1 ? NetTopology::segment : NetTopology::rectangle;

  ElasticNet net = make_elastic_net(cmd.shape, topology);
  int ribs = static_cast<int>(net.graph.stars().size());
  const auto [lambda_base, mu_base] = moduli_for_resolution(
      cmd.lambda0, cmd.mu0, net.dim, static_cast<int>(net.graph.edges().size()),
      std::max(ribs, 1));

  SofteningSchedule schedule;
  schedule.multipliers = cmd.schedule;
  schedule.lambda_base = lambda_base;
  schedule.mu_base = mu_base;

  OptimizeParams params;
  params.tol = cmd.tol;
  params.max_iter = cmd.max_iter;

  std::mt19937_64 rng(cmd.seed);
  ElasticMapModel model = fit_elastic_map(X, net, schedule, params, rng);

  std::ostringstream model_text;
  write_map_model(model_text, model);

  std::ostringstream trace;
  trace << "epoch\tstep\tdata_term\tstretch\tbending\ttotal\n";
  for (size_t e = 0; e < model.epoch_traces.size(); ++e)
    for (size_t t = 0; t < model.epoch_traces[e].size(); ++t) {
      const EnergyBreakdown& b = model.epoch_traces[e][t];
      trace << e << "\t" << t << "\t" << format_double(b.data_term) << "\t"
            << format_double(b.stretch) << "\t" << format_double(b.bending) << "\t"
            << format_double(b.total()) << "\n";
    }

  std::ostringstream proj;
  proj << "index";
  for (int a = 0; a < net.dim; ++a) proj << "\tinternal_" << a;
  proj << "\tdistance\n";
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    MapProjection p = project_to_map(X.row(i), model);
    proj << i;
    for (int a = 0; a < net.dim; ++a) proj << "\t" << format_double(p.internal(a));
    proj << "\t" << format_double(p.distance) << "\n";
  }

  RunOutput out{cmd.out, {}, {}};
  out.files["map_model.txt"] = model_text.str();
  out.files["energy_trace.tsv"] = trace.str();
  out.files["projections.tsv"] = proj.str();
  out.manifest = json{{"command", "fit elastic-map"},
                      {"version", kVersion},
                      {"input_hash", input.hash},
                      {"options", table_manifest(cmd.table)},
                      {"shape", cmd.shape},
                      {"topology", net_topology_name(topology)},
                      {"lambda0", cmd.lambda0},
                      {"mu0", cmd.mu0},
                      {"lambda_base", lambda_base},
                      {"mu_base", mu_base},
                      {"schedule", cmd.schedule},
                      {"tol", cmd.tol},
                      {"max_iter", cmd.max_iter},
                      {"seed", cmd.seed}};
  out.flush();
}

void run_fit_tree(const FitTreeCmd& cmd) {
  LoadedInput input = load_input(cmd.table);
  const DataMatrix& X = input.table.data;

  ComplexityBudget budget;
  if (cmd.branch_cap >= 0) {
    budget.policy = ScPolicy{ScPolicy::Kind::branch_cap, cmd.branch_cap};
    budget.sc_max = static_cast<double>(cmd.branch_cap);
  } else {
    budget.policy = ScPolicy{ScPolicy::Kind::vertex_count, 0};
    budget.sc_max = static_cast<double>(cmd.nodes);
  }
  budget.cc_max = cmd.cc_max;

  GrowParams params;
  params.lambda = cmd.lambda;
  params.mu = cmd.mu;
  params.candidate_opt.max_iter = cmd.candidate_iters;

  std::mt19937_64 rng(cmd.seed);
  GrowthResult result =
      grow_principal_graph(X, parse_grammar_sequence(cmd.grammars), budget, params, rng);

  RunOutput out{cmd.out, {}, {}};
  out.files["tree_model.txt"] = tree_model_text(result.graph, result.embedding);
  out.files["growth_log.txt"] = growth_log_text(result.log);
  out.files["energy_trace.tsv"] = energy_trace_tsv(result.log);
  out.files["projections.tsv"] = vertex_projection_tsv(X, result.embedding);

  json manifest{{"command", "fit tree"},
                {"version", kVersion},
                {"input_hash", input.hash},
                {"options", table_manifest(cmd.table)},
                {"nodes", cmd.nodes},
                {"branch_cap", cmd.branch_cap},
                {"cc_max", cmd.cc_max},
                {"lambda", cmd.lambda},
                {"mu", cmd.mu},
                {"grammars", cmd.grammars},
                {"candidate_iters", cmd.candidate_iters},
                {"seed", cmd.seed},
                {"final_vertices", result.graph.vertex_count()},
                {"applications", construction_complexity(result.log)},
                {"warnings", result.warnings}};
  if (!result.log.empty()) manifest["final_energy"] = energy_json(result.log.back().energy);

  if (!input.table.labels.empty()) {
    std::mt19937_64 layout_rng(cmd.seed);
    PcaBasis basis = fit_components(
        X, static_cast<int>(std::min<Eigen::Index>(2, std::min(X.rows() - 1, X.cols()))),
        layout_rng);
    TreeLayout layout = layout_metro_map(result.graph, result.embedding, basis);
    const Partition part = partition_by_vertices(X, result.embedding);
    PieStats pies = pie_statistics(part, input.table.labels);

    std::ostringstream svg, layout_json;
    emit_svg(svg, layout, pies);
    write_layout_json(layout_json, layout, pies);
    out.files["metro_map.svg"] = svg.str();
    out.files["layout.json"] = layout_json.str();
    manifest["layout_crossings"] = layout.crossings;
  }
  out.manifest = std::move(manifest);
  out.flush();
}

void run_fit_polyline(const FitPolylineCmd& cmd) {
  LoadedInput input = load_input(cmd.table);
  const DataMatrix& X = input.table.data;
  PolylineParams params;
  params.lambda_prime = cmd.lambda_prime;
  params.beta = cmd.beta;
  params.max_segments = cmd.max_segments;
  std::mt19937_64 rng(cmd.seed);
  PolylineFit fit = fit_polyline(X, params, rng);

  std::ostringstream model_text;
  write_polyline(model_text, fit.curve);

  std::ostringstream trace;
  trace << "round\tsegments\tmsd\tpenalized\tlambda\n";
  for (size_t t = 0; t < fit.trace.size(); ++t) {
    const PolylineRound& r = fit.trace[t];
    trace << t << "\t" << r.segments << "\t" << format_double(r.msd) << "\t"
          << format_double(r.penalized) << "\t" << format_double(r.lambda) << "\n";
  }

  const Partition part = partition_polyline(X, fit.curve);
  const int vcount = fit.curve.segment_count() + 1;
  std::ostringstream proj;
  proj << "index\tentity\tentity_index\n";
  for (size_t i = 0; i < part.assignment.size(); ++i) {
    const int e = part.assignment[i];
    if (e < vcount)
      proj << i << "\tvertex\t" << e << "\n";
    else
      proj << i << "\tsegment\t" << (e - vcount) << "\n";
  }

  RunOutput out{cmd.out, {}, {}};
  out.files["polyline_model.txt"] = model_text.str();
  out.files["trace.tsv"] = trace.str();
  out.files["projections.tsv"] = proj.str();
  out.manifest = json{{"command", "fit polyline"},
                      {"version", kVersion},
                      {"input_hash", input.hash},
                      {"options", table_manifest(cmd.table)},
                      {"lambda_prime", cmd.lambda_prime},
                      {"beta", cmd.beta},
                      {"max_segments", cmd.max_segments},
                      {"seed", cmd.seed},
                      {"segments", fit.curve.segment_count()},
                      {"final_msd", fit.trace.empty() ? 0.0 : fit.trace.back().msd}};
  out.flush();
}

void run_fit_complex(const FitComplexCmd& cmd) {
  LoadedInput input = load_input(cmd.table);
  const DataMatrix& X = input.table.data;
  if (cmd.factors < 1) throw Error("parse-error", "--factors must be >= 1");
  if (X.cols() < cmd.factors)
    throw Error("dimension-mismatch", "need at least one data dimension per factor");

  GrowParams params;
  params.lambda = cmd.lambda;
  params.mu = cmd.mu;

  // Initialize every factor as a 2-vertex chain spread over its own
  // principal component.
  std::mt19937_64 rng(cmd.seed);
  PcaBasis basis = fit_components(
      X,
      static_cast<int>(std::min<Eigen::Index>(cmd.factors, std::min(X.rows() - 1, X.cols()))),
      rng);
  if (basis.count() < cmd.factors)
    throw Error("rank-deficiency", "data rank is below the factor count");
  const Eigen::MatrixXd proj = project_to_basis(X, basis);

  CubicComplex complex;
  for (int f = 0; f < cmd.factors; ++f)
    complex.factors.push_back(
        ElasticGraph::primitive(2, {Edge{0, 1, cmd.lambda}}, cmd.mu));
  Embedding phi(complex.product_vertex_count(), X.cols());
  for (int p = 0; p < complex.product_vertex_count(); ++p) {
    const std::vector<int> tuple = complex.index_to_tuple(p);
    Eigen::VectorXd pos = basis.origin;
    for (int f = 0; f < cmd.factors; ++f) {
      const double lo = proj.col(f).minCoeff();
      const double hi = proj.col(f).maxCoeff();
      pos += (tuple[static_cast<size_t>(f)] == 0 ? lo : hi) * basis.components.col(f);
    }
    phi.row(p) = pos.transpose();
  }

  ComplexityBudget budget;
  budget.policy = ScPolicy{ScPolicy::Kind::vertex_count, 0};
  budget.sc_max = static_cast<double>(cmd.nodes_per_factor);
  budget.cc_max = cmd.cc_max;

  ProductGrowthResult result =
      grow_product(X, complex, phi, {grow_grammar()}, budget, params);

  std::ostringstream model_text;
  write_complex(model_text, result.complex, result.embedding);

  std::ostringstream log;
  log << "round\tfactor\top\tsite\tsc\tdata_term\tstretch\tbending\ttotal\tproduct_vertices\n";
  for (const auto& r : result.log) {
    log << r.round << "\t" << r.factor << "\t" << grammar_op_name(r.op) << "\t" << r.site
        << "\t" << format_double(r.sc) << "\t" << format_double(r.energy.data_term)
        << "\t" << format_double(r.energy.stretch) << "\t"
        << format_double(r.energy.bending) << "\t" << format_double(r.energy.total())
        << "\t" << r.product_vertex_count << "\n";
  }

  RunOutput out{cmd.out, {}, {}};
  out.files["complex_model.txt"] = model_text.str();
  out.files["growth_log.tsv"] = log.str();
  out.files["projections.tsv"] = vertex_projection_tsv(X, result.embedding);
  out.manifest = json{{"command", "fit complex"},
                      {"version", kVersion},
                      {"input_hash", input.hash},
                      {"options", table_manifest(cmd.table)},
                      {"factors", cmd.factors},
                      {"nodes_per_factor", cmd.nodes_per_factor},
                      {"cc_max", cmd.cc_max},
                      {"lambda", cmd.lambda},
                      {"mu", cmd.mu},
                      {"seed", cmd.seed},
                      {"product_vertices", result.complex.product_vertex_count()},
                      {"warnings", result.warnings}};
  out.flush();
}

void run_project(const ProjectCmd& cmd) {
  LoadedInput input = load_input(cmd.table);
  const DataMatrix& X = input.table.data;
  const std::string model_bytes = read_file(cmd.model);
  std::istringstream peek(model_bytes);
  std::string tag;
  peek >> tag;

  RunOutput out{cmd.out, {}, {}};
  json manifest{{"command", "project"},
                {"version", kVersion},
                {"input_hash", input.hash},
                {"model", cmd.model},
                {"model_hash", fnv1a_hex(model_bytes)},
                {"options", table_manifest(cmd.table)}};

  std::istringstream in(model_bytes);
  if (tag == "pgm-pca") {
    PcaBasis basis = read_pca_model(in);
    Eigen::MatrixXd coords = project_to_basis(X, basis);
    std::vector<std::string> header;
    for (int c = 0; c < basis.count(); ++c)
      header.push_back("beta_" + std::to_string(c));
    out.files["projections.tsv"] = matrix_tsv(coords, header);
  } else if (tag == "pgm-elastic-map") {
    ElasticMapModel model = read_map_model(in);
    std::ostringstream proj;
    proj << "index";
    for (int a = 0; a < model.net.dim; ++a) proj << "\tinternal_" << a;
    proj << "\tdistance\n";
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
      MapProjection p = project_to_map(X.row(i), model);
      proj << i;
      for (int a = 0; a < model.net.dim; ++a)
        proj << "\t" << format_double(p.internal(a));
      proj << "\t" << format_double(p.distance) << "\n";
    }
    out.files["projections.tsv"] = proj.str();
  } else if (tag == "pgm-tree") {
    auto [graph, phi] = read_tree_model(in);
    out.files["projections.tsv"] = vertex_projection_tsv(X, phi);
  } else if (tag == "pgm-centroids") {
    int version = 0;
    in >> tag >> version;
    Centroids Y = read_positions(in);
    std::ostringstream proj;
    proj << "index\tcluster\tdistance\n";
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
      double best = std::numeric_limits<double>::infinity();
      int best_c = 0;
      for (Eigen::Index c = 0; c < Y.rows(); ++c) {
        const double d =
            gapped_sqdist_to_point(X.values(), X.gaps(), i, Y.row(c).transpose());
        if (d < best) {
          best = d;
          best_c = static_cast<int>(c);
        }
      }
      proj << i << "\t" << best_c << "\t" << format_double(std::sqrt(best)) << "\n";
    }
    out.files["projections.tsv"] = proj.str();
  } else if (tag == "pgm-polyline") {
    PolygonalCurve Y = read_polyline(in);
    const Partition part = partition_polyline(X, Y);
    const int vcount = Y.segment_count() + 1;
    std::ostringstream proj;
    proj << "index\tentity\tentity_index\n";
    for (size_t i = 0; i < part.assignment.size(); ++i) {
      const int e = part.assignment[i];
      if (e < vcount)
        proj << i << "\tvertex\t" << e << "\n";
      else
        proj << i << "\tsegment\t" << (e - vcount) << "\n";
    }
    out.files["projections.tsv"] = proj.str();
  } else if (tag == "pgm-complex") {
    auto [complex, phi] = read_complex(in);
    out.files["projections.tsv"] = vertex_projection_tsv(X, phi);
  } else {
    throw Error("parse-error", "unknown model kind '" + tag + "'");
  }
  out.manifest = std::move(manifest);
  out.flush();
}

void run_layout(const LayoutCmd& cmd) {
  LoadedInput input = load_input(cmd.table);
  const DataMatrix& X = input.table.data;
  if (input.table.labels.empty())
    throw Error("parse-error", "layout needs --label-col for the pie charts");

  const std::string model_bytes = read_file(cmd.model);
  std::istringstream in(model_bytes);
  auto [graph, phi] = read_tree_model(in);

  std::mt19937_64 rng(cmd.seed);
  PcaBasis basis = fit_components(
      X, static_cast<int>(std::min<Eigen::Index>(2, std::min(X.rows() - 1, X.cols()))),
      rng);
  const Partition part = partition_by_vertices(X, phi);
  LayoutOptions options;
  options.local_plane = cmd.local_plane;
  options.data = &X;
  options.partition = &part;
  TreeLayout layout = layout_metro_map(graph, phi, basis, options);
  PieStats pies = pie_statistics(part, input.table.labels);

  std::ostringstream svg, layout_json;
  emit_svg(svg, layout, pies);
  write_layout_json(layout_json, layout, pies);

  RunOutput out{cmd.out, {}, {}};
  out.files["metro_map.svg"] = svg.str();
  out.files["layout.json"] = layout_json.str();
  out.manifest = json{{"command", "layout"},
                      {"version", kVersion},
                      {"input_hash", input.hash},
                      {"model", cmd.model},
                      {"model_hash", fnv1a_hex(model_bytes)},
                      {"options", table_manifest(cmd.table)},
                      {"local_plane", cmd.local_plane},
                      {"seed", cmd.seed},
                      {"crossings", layout.crossings}};
  out.flush();
}

void run_report(const ReportCmd& cmd) {
  const fs::path dir(cmd.run_dir);
  const fs::path manifest_path = dir / "manifest.json";
  if (!fs::exists(manifest_path))
    throw Error("io-error", "no manifest.json under '" + cmd.run_dir + "'");
  const json manifest = json::parse(read_file(manifest_path.string()));
  std::cout << "run: " << manifest.value("command", "?") << "\n";
  std::cout << "version: " << manifest.value("version", "?") << "\n";
  if (manifest.contains("seed")) std::cout << "seed: " << manifest["seed"] << "\n";
  std::cout << "input_hash: " << manifest.value("input_hash", "?") << "\n";
  std::cout << "artifacts:\n";
  std::vector<std::string> names;
  for (const auto& entry : fs::directory_iterator(dir))
    names.push_back(entry.path().filename().string());
  std::sort(names.begin(), names.end());
  for (const auto& name : names) std::cout << "  " << name << "\n";
  for (const auto& key : {"final_energy", "final_distortion", "final_msd",
                          "final_vertices", "applications", "crossings"}) {
    if (manifest.contains(key)) std::cout << key << ": " << manifest[key] << "\n";
  }
}

}  // namespace

int run(std::vector<std::string> args) {
  CLI::App app{"principal objects: components, points, graphs, manifolds"};
  // Sections address subcommands: [fit.tree] nodes=50. Flags win over keys.
  app.set_config("--config");
  app.require_subcommand(1);

  IngestTableCmd ingest_table_cmd;
  IngestTripletsCmd ingest_triplets_cmd;
  FitPcaCmd pca_cmd;
  FitKmeansCmd kmeans_cmd;
  FitMapCmd map_cmd;
  FitTreeCmd tree_cmd;
  FitPolylineCmd polyline_cmd;
  FitComplexCmd complex_cmd;
  ProjectCmd project_cmd;
  LayoutCmd layout_cmd;
  ReportCmd report_cmd;

  CLI::App* ingest = app.add_subcommand("ingest", "read raw inputs into tables");
  ingest->require_subcommand(1);
  CLI::App* ingest_table = ingest->add_subcommand("table", "normalize a delimited table");
  add_table_options(ingest_table, ingest_table_cmd.table);
  ingest_table->add_option("--out", ingest_table_cmd.out, "output directory")->required();

  CLI::App* ingest_triplets =
      ingest->add_subcommand("triplets", "triplet frequencies of FASTA fragments");
  ingest_triplets->add_option("--fasta", ingest_triplets_cmd.fasta, "FASTA file")
      ->required();
  ingest_triplets->add_option("--width", ingest_triplets_cmd.width, "fragment width");
  ingest_triplets->add_option("--fragments", ingest_triplets_cmd.fragments,
                              "number of fragments");
  ingest_triplets->add_option("--seed", ingest_triplets_cmd.seed, "rng seed")->required();
  ingest_triplets->add_option("--out", ingest_triplets_cmd.out, "output directory")
      ->required();

  CLI::App* fit = app.add_subcommand("fit", "fit a principal object");
  fit->require_subcommand(1);

  CLI::App* fit_pca = fit->add_subcommand("pca", "principal components");
  add_table_options(fit_pca, pca_cmd.table);
  fit_pca->add_option("--k", pca_cmd.k, "component count")->required();
  fit_pca->add_option("--seed", pca_cmd.seed, "rng seed")->required();
  fit_pca->add_option("--eps", pca_cmd.eps, "direction angle tolerance");
  fit_pca->add_option("--max-iter", pca_cmd.max_iter, "iteration cap");
  fit_pca->add_option("--out", pca_cmd.out, "output directory")->required();

  CLI::App* fit_kmeans = fit->add_subcommand("kmeans", "principal points");
  add_table_options(fit_kmeans, kmeans_cmd.table);
  fit_kmeans->add_option("--k", kmeans_cmd.k, "cluster count")->required();
  fit_kmeans->add_option("--seed", kmeans_cmd.seed, "rng seed")->required();
  fit_kmeans->add_option("--seeding", kmeans_cmd.seeding, "kmeans++ or uniform");
  fit_kmeans->add_option("--max-iter", kmeans_cmd.max_iter, "sweep cap");
  fit_kmeans->add_option("--out", kmeans_cmd.out, "output directory")->required();

  CLI::App* fit_map = fit->add_subcommand("elastic-map", "elastic principal manifold");
  add_table_options(fit_map, map_cmd.table);
  fit_map->add_option("--shape", map_cmd.shape, "per-axis vertex counts")
      ->required()
      ->delimiter(',');
  fit_map->add_option("--topology", map_cmd.topology, "segment|rectangle|sphere");
  fit_map->add_option("--lambda0", map_cmd.lambda0, "base stretching modulus");
  fit_map->add_option("--mu0", map_cmd.mu0, "base bending modulus");
  fit_map->add_option("--schedule", map_cmd.schedule, "softening multipliers")
      ->delimiter(',');
  fit_map->add_option("--tol", map_cmd.tol, "optimizer displacement tolerance");
  fit_map->add_option("--max-iter", map_cmd.max_iter, "optimizer iteration cap");
  fit_map->add_option("--seed", map_cmd.seed, "rng seed")->required();
  fit_map->add_option("--out", map_cmd.out, "output directory")->required();

  CLI::App* fit_tree = fit->add_subcommand("tree", "elastic principal tree");
  add_table_options(fit_tree, tree_cmd.table);
  fit_tree->add_option("--nodes", tree_cmd.nodes, "vertex budget");
  fit_tree->add_option("--branch-cap", tree_cmd.branch_cap,
                       "switch to the 3-star cap policy with this b_max");
  fit_tree->add_option("--cc-max", tree_cmd.cc_max, "grammar application budget");
  fit_tree->add_option("--lambda", tree_cmd.lambda, "stretching modulus");
  fit_tree->add_option("--mu", tree_cmd.mu, "bending modulus");
  fit_tree->add_option("--grammar", tree_cmd.grammars,
                       "comma list of grow|shrink rounds");
  fit_tree->add_option("--candidate-iters", tree_cmd.candidate_iters,
                       "optimizer cap while scoring candidates");
  fit_tree->add_option("--seed", tree_cmd.seed, "rng seed")->required();
  fit_tree->add_option("--out", tree_cmd.out, "output directory")->required();

  CLI::App* fit_polyline = fit->add_subcommand("polyline", "piecewise linear curve");
  add_table_options(fit_polyline, polyline_cmd.table);
  fit_polyline->add_option("--lambda-prime", polyline_cmd.lambda_prime, "penalty factor");
  fit_polyline->add_option("--beta", polyline_cmd.beta, "stopping factor");
  fit_polyline->add_option("--max-segments", polyline_cmd.max_segments, "safety cap");
  fit_polyline->add_option("--seed", polyline_cmd.seed, "rng seed")->required();
  fit_polyline->add_option("--out", polyline_cmd.out, "output directory")->required();

  CLI::App* fit_complex = fit->add_subcommand("complex", "principal cubic complex");
  add_table_options(fit_complex, complex_cmd.table);
  fit_complex->add_option("--factors", complex_cmd.factors, "number of factors");
  fit_complex->add_option("--nodes-per-factor", complex_cmd.nodes_per_factor,
                          "vertex budget per factor");
  fit_complex->add_option("--cc-max", complex_cmd.cc_max, "application budget");
  fit_complex->add_option("--lambda", complex_cmd.lambda, "stretching modulus");
  fit_complex->add_option("--mu", complex_cmd.mu, "bending modulus");
  fit_complex->add_option("--seed", complex_cmd.seed, "rng seed")->required();
  fit_complex->add_option("--out", complex_cmd.out, "output directory")->required();

  CLI::App* project = app.add_subcommand("project", "project data onto a fitted model");
  project->add_option("--model", project_cmd.model, "model file")->required();
  add_table_options(project, project_cmd.table);
  project->add_option("--out", project_cmd.out, "output directory")->required();

  CLI::App* layout = app.add_subcommand("layout", "metro-map a fitted tree");
  layout->add_option("--model", layout_cmd.model, "tree model file")->required();
  add_table_options(layout, layout_cmd.table);
  layout->add_option("--seed", layout_cmd.seed, "rng seed (leaf-ordering plane)")
      ->required();
  layout->add_flag("--local-plane", layout_cmd.local_plane,
                   "order leaves by per-star local planes");
  layout->add_option("--out", layout_cmd.out, "output directory")->required();

  CLI::App* report = app.add_subcommand("report", "summarize a run directory");
  report->add_option("--run", report_cmd.run_dir, "run directory")->required();

  std::reverse(args.begin(), args.end());
  try {
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (ingest_table->parsed()) run_ingest_table(ingest_table_cmd);
    if (ingest_triplets->parsed()) run_ingest_triplets(ingest_triplets_cmd);
    if (fit_pca->parsed()) run_fit_pca(pca_cmd);
    if (fit_kmeans->parsed()) run_fit_kmeans(kmeans_cmd);
    if (fit_map->parsed()) run_fit_map(map_cmd);
    if (fit_tree->parsed()) run_fit_tree(tree_cmd);
    if (fit_polyline->parsed()) run_fit_polyline(polyline_cmd);
    if (fit_complex->parsed()) run_fit_complex(complex_cmd);
    if (project->parsed()) run_project(project_cmd);
    if (layout->parsed()) run_layout(layout_cmd);
    if (report->parsed()) run_report(report_cmd);
  } catch (const Error& e) {
    std::cerr << "error: " << e.category() << ": "
              << std::string(e.what()).substr(e.category().size() + 2) << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: internal: " << e.what() << "\n";
    return 3;
  }
  return 0;
}

}  // namespace pgm::cli
