// SPDX-License-Identifier: Apache-2.0

#include "rmmb/scenario.hpp"

#include <yaml-cpp/yaml.h>

#include <Eigen/Eigenvalues>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "rmmb/detail/text.hpp"

namespace rmmb {

namespace {

constexpr double kHermitianTol = 1e-10;

[[noreturn]] void fail(const std::string& msg) {
  throw std::invalid_argument(msg);
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  return out;
}

}  // namespace

double Beamformer::sum_power() const {
  double p = 0.0;
  for (const auto& wg : w) p += wg.squaredNorm();
  return p;
}

double Beamformer::antenna_power(int m) const {
  double p = 0.0;
  for (const auto& wg : w) p += std::norm(wg(m));
  return p;
}

double Beamformer::max_antenna_power() const {
  if (w.empty()) return 0.0;
  double p = 0.0;
  for (int m = 0; m < w[0].size(); ++m) p = std::max(p, antenna_power(m));
  return p;
}

ErrorSample ErrorSample::zero(int M, const std::vector<int>& users_per_group) {
  ErrorSample s;
  s.e.reserve(users_per_group.size());
  for (int n : users_per_group) {
    s.e.emplace_back(n, Eigen::VectorXcd::Zero(M));
  }
  return s;
}

int Scenario::total_users() const {
  int n = 0;
  for (const auto& grp : groups) n += static_cast<int>(grp.size());
  return n;
}

int Scenario::flat_index(int g, int i) const {
  int n = 0;
  for (int l = 0; l < g; ++l) n += static_cast<int>(groups[l].size());
  return n + i;
}

std::vector<int> Scenario::users_per_group() const {
  std::vector<int> n;
  n.reserve(groups.size());
  for (const auto& grp : groups) n.push_back(static_cast<int>(grp.size()));
  return n;
}

void Scenario::finalize() {
  if (M <= 0) fail("antenna count must be positive");
  if (groups.empty()) fail("at least one group required");
  if (tau.has_value() == gamma.has_value()) {
    fail("exactly one of tau (power minimization) or gamma (max-min "
         "fairness) must be set");
  }
  if (tau && static_cast<int>(tau->size()) != group_count()) {
    fail("tau must have one entry per group");
  }
  if (tau) {
    for (double t : *tau) {
      if (!(t >= 0.0)) fail("SINR targets must be nonnegative");
    }
  }
  if (gamma && !(*gamma > 0.0)) fail("power budget must be positive");

  for (auto& grp : groups) {
    if (grp.empty()) fail("groups must be nonempty");
    for (auto& u : grp) {
      if (u.h_hat.size() != M) fail("channel length must equal M");
      if (!(u.sigma2 > 0.0)) fail("noise power must be positive");
      if (u.C) {
        if (u.C->rows() != M || u.C->cols() != M) {
          fail("uncertainty matrix must be M x M");
        }
        u.epsilon = epsilon_of(*u.C);
        u.c_inv_sqrt = hermitian_inverse_sqrt(*u.C);
      } else {
        u.epsilon = 0.0;
        u.c_inv_sqrt.resize(0, 0);
      }
    }
  }
}

Scenario Scenario::without_uncertainty() const {
  Scenario sc = *this;
  for (auto& grp : sc.groups) {
    for (auto& u : grp) {
      u.C.reset();
      u.epsilon = 0.0;
      u.c_inv_sqrt.resize(0, 0);
    }
  }
  return sc;
}

double epsilon_of(const Eigen::MatrixXcd& C) {
  if (C.rows() != C.cols() || C.rows() == 0) {
    fail("uncertainty matrix must be square and nonempty");
  }
  const double scale = std::max(1.0, C.cwiseAbs().maxCoeff());
  const double asym = (C - C.adjoint()).cwiseAbs().maxCoeff();
  if (asym > kHermitianTol * scale) {
    fail("uncertainty matrix is not Hermitian (max asymmetry " +
         detail::format_double(asym) + ")");
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(
      ((C + C.adjoint()) * 0.5).eval(), Eigen::EigenvaluesOnly);
  const double lmin = es.eigenvalues().minCoeff();
  if (!(lmin > 0.0)) {
    fail("uncertainty matrix is not positive definite (lambda_min " +
         detail::format_double(lmin) + ")");
  }
  return 1.0 / std::sqrt(lmin);
}

Eigen::MatrixXcd hermitian_inverse_sqrt(const Eigen::MatrixXcd& C) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(
      ((C + C.adjoint()) * 0.5).eval());
  const auto& lam = es.eigenvalues();
  if (!(lam.minCoeff() > 0.0)) fail("matrix is not positive definite");
  return es.eigenvectors() *
         lam.cwiseSqrt().cwiseInverse().asDiagonal() *
         es.eigenvectors().adjoint();
}

std::vector<std::vector<Eigen::VectorXcd>> generate_channels(
    int M, const std::vector<int>& users_per_group, std::uint64_t seed) {
  std::vector<std::vector<Eigen::VectorXcd>> out;
  out.reserve(users_per_group.size());
  std::uint32_t flat = 0;
  for (int n : users_per_group) {
    auto& grp = out.emplace_back();
    grp.reserve(n);
    for (int i = 0; i < n; ++i, ++flat) {
      Philox rng(seed, kStreamChannel, flat);
      Eigen::VectorXcd h(M);
      for (int m = 0; m < M; ++m) h(m) = rng.next_complex_gaussian();
      grp.push_back(std::move(h));
    }
  }
  return out;
}

Eigen::VectorXcd sample_error(const Eigen::MatrixXcd& c_inv_sqrt,
                              Philox& rng) {
  const int M = static_cast<int>(c_inv_sqrt.rows());
  Eigen::VectorXcd v(M);
  for (int m = 0; m < M; ++m) v(m) = rng.next_complex_gaussian();
  const double n = v.norm();
  if (n == 0.0) return Eigen::VectorXcd::Zero(M);
  const bool boundary = (rng.next_u32() & 1u) != 0;
  const double r = boundary ? 1.0 : rng.next_double();
  return c_inv_sqrt * (v * (r / n));
}

Eigen::VectorXcd sample_error_seeded(const Eigen::MatrixXcd& C,
                                     std::uint64_t seed) {
  Philox rng(seed, kStreamError);
  return sample_error(hermitian_inverse_sqrt(C), rng);
}

Scenario make_sphere_scenario(int M, const std::vector<int>& users_per_group,
                              double mu2, double sigma2, std::uint64_t seed) {
  if (mu2 < 0.0) fail("mu2 must be nonnegative");
  Scenario sc;
  sc.M = M;
  auto channels = generate_channels(M, users_per_group, seed);
  sc.groups.resize(channels.size());
  for (std::size_t g = 0; g < channels.size(); ++g) {
    for (auto& h : channels[g]) {
      UserChannel u;
      u.h_hat = std::move(h);
      u.sigma2 = sigma2;
      if (mu2 > 0.0) {
        u.C = Eigen::MatrixXcd::Identity(M, M) / mu2;
      }
      sc.groups[g].push_back(std::move(u));
    }
  }
  return sc;
}

namespace {

Eigen::MatrixXcd parse_complex_matrix(const YAML::Node& node, int M,
                                      const std::string& what) {
  if (!node.IsSequence() || static_cast<int>(node.size()) != M) {
    fail(what + " must be a list of M rows");
  }
  Eigen::MatrixXcd A(M, M);
  for (int r = 0; r < M; ++r) {
    const auto row = node[r];
    if (!row.IsSequence() || static_cast<int>(row.size()) != 2 * M) {
      fail(what + " rows must hold 2M numbers (interleaved re, im)");
    }
    for (int c = 0; c < M; ++c) {
      A(r, c) = {row[2 * c].as<double>(), row[2 * c + 1].as<double>()};
    }
  }
  return A;
}

std::vector<double> parse_scalar_or_list(const YAML::Node& node, int n,
                                         const std::string& what) {
  std::vector<double> out;
  if (node.IsScalar()) {
    out.assign(n, node.as<double>());
  } else if (node.IsSequence()) {
    if (static_cast<int>(node.size()) != n) {
      fail(what + " list must have " + detail::format_int(n) + " entries");
    }
    for (const auto& v : node) out.push_back(v.as<double>());
  } else {
    fail(what + " must be a number or a list");
  }
  return out;
}

}  // namespace

Scenario load_scenario(const std::string& path) {
  YAML::Node root;
  try {
    root = YAML::LoadFile(path);
  } catch (const YAML::Exception& e) {
    fail("cannot parse scenario config '" + path + "': " + e.what());
  }

  Scenario sc;
  if (!root["m"] || !root["g"]) fail("scenario config needs 'm' and 'g'");
  sc.M = root["m"].as<int>();
  const int G = root["g"].as<int>();
  if (sc.M <= 0 || G <= 0) fail("'m' and 'g' must be positive");

  std::vector<int> upg;
  if (!root["users_per_group"]) fail("scenario config needs 'users_per_group'");
  if (root["users_per_group"].IsScalar()) {
    upg.assign(G, root["users_per_group"].as<int>());
  } else {
    for (const auto& v : root["users_per_group"]) upg.push_back(v.as<int>());
    if (static_cast<int>(upg.size()) != G) {
      fail("'users_per_group' must have one entry per group");
    }
  }
  int n_users = 0;
  for (int n : upg) {
    if (n <= 0) fail("'users_per_group' entries must be positive");
    n_users += n;
  }

  std::vector<std::vector<Eigen::VectorXcd>> channels;
  if (root["channels"]) {
    auto csv = std::filesystem::path(root["channels"].as<std::string>());
    if (csv.is_relative()) {
      csv = std::filesystem::path(path).parent_path() / csv;
    }
    channels = load_channels_csv(csv.string(), sc.M, upg);
  } else {
    const auto seed = root["seed"] ? root["seed"].as<std::uint64_t>() : 0;
    channels = generate_channels(sc.M, upg, seed);
  }

  std::vector<double> sigma2(n_users, 1.0);
  if (root["noise"] && root["noise"]["sigma2"]) {
    sigma2 = parse_scalar_or_list(root["noise"]["sigma2"], n_users,
                                  "noise.sigma2");
  }

  sc.groups.resize(G);
  int flat = 0;
  for (int g = 0; g < G; ++g) {
    for (int i = 0; i < upg[g]; ++i, ++flat) {
      UserChannel u;
      u.h_hat = channels[g][i];
      u.sigma2 = sigma2[flat];
      sc.groups[g].push_back(std::move(u));
    }
  }

  const auto error = root["error"];
  if (error) {
    if (error["mu2"] && error["matrices"]) {
      fail("error: give either mu2 or matrices, not both");
    }
    if (error["mu2"]) {
      const double mu2 = error["mu2"].as<double>();
      if (mu2 < 0.0) fail("error.mu2 must be nonnegative");
      if (mu2 > 0.0) {
        for (auto& grp : sc.groups) {
          for (auto& u : grp) {
            u.C = Eigen::MatrixXcd::Identity(sc.M, sc.M) / mu2;
          }
        }
      }
    } else if (error["matrices"]) {
      const auto mats = error["matrices"];
      if (!mats.IsSequence() || static_cast<int>(mats.size()) != n_users) {
        fail("error.matrices must list one matrix per user (flat order)");
      }
      int k = 0;
      for (auto& grp : sc.groups) {
        for (auto& u : grp) {
          u.C = parse_complex_matrix(mats[k++], sc.M, "error.matrices entry");
        }
      }
    }
  }

  const bool has_tau = root["targets"] && root["targets"]["tau"];
  const bool has_gamma = root["power"] && root["power"]["gamma"];
  if (has_tau == has_gamma) {
    fail("give exactly one of targets.tau or power.gamma");
  }
  if (has_tau) {
    sc.tau = parse_scalar_or_list(root["targets"]["tau"], G, "targets.tau");
  } else {
    sc.gamma = root["power"]["gamma"].as<double>();
  }

  if (root["power"] && root["power"]["mode"]) {
    const auto mode = root["power"]["mode"].as<std::string>();
    if (mode == "sum") {
      sc.mode = PowerMode::SumPower;
    } else if (mode == "per_antenna") {
      sc.mode = PowerMode::PerAntennaPower;
    } else {
      fail("power.mode must be 'sum' or 'per_antenna'");
    }
  }

  sc.finalize();
  return sc;
}

namespace {

void write_complex_row(std::ofstream& os, const Eigen::VectorXcd& v) {
  for (int m = 0; m < v.size(); ++m) {
    if (m) os << ',';
    os << detail::format_double(v(m).real()) << ','
       << detail::format_double(v(m).imag());
  }
  os << '\n';
}

Eigen::VectorXcd read_complex_row(const std::string& line, int M,
                                  const std::string& what) {
  const auto cells = split_csv_line(line);
  if (static_cast<int>(cells.size()) != 2 * M) {
    fail(what + ": expected " + detail::format_int(2 * M) +
         " columns, got " + detail::format_int(cells.size()));
  }
  Eigen::VectorXcd v(M);
  for (int m = 0; m < M; ++m) {
    v(m) = {detail::parse_double(cells[2 * m]),
            detail::parse_double(cells[2 * m + 1])};
  }
  return v;
}

}  // namespace

void save_channels_csv(const Scenario& sc, const std::string& path) {
  std::ofstream os(path);
  if (!os) fail("cannot open '" + path + "' for writing");
  for (const auto& grp : sc.groups) {
    for (const auto& u : grp) write_complex_row(os, u.h_hat);
  }
}

std::vector<std::vector<Eigen::VectorXcd>> load_channels_csv(
    const std::string& path, int M, const std::vector<int>& users_per_group) {
  std::ifstream is(path);
  if (!is) fail("cannot open channel file '" + path + "'");
  std::vector<std::vector<Eigen::VectorXcd>> out(users_per_group.size());
  std::string line;
  for (std::size_t g = 0; g < users_per_group.size(); ++g) {
    for (int i = 0; i < users_per_group[g]; ++i) {
      if (!std::getline(is, line)) fail("channel file '" + path + "' is short");
      out[g].push_back(read_complex_row(line, M, "channel file row"));
    }
  }
  return out;
}

void save_beamformer_csv(const Beamformer& w, const std::string& path) {
  std::ofstream os(path);
  if (!os) fail("cannot open '" + path + "' for writing");
  for (const auto& wg : w.w) write_complex_row(os, wg);
}

Beamformer load_beamformer_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) fail("cannot open beamformer file '" + path + "'");
  Beamformer w;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto cells = split_csv_line(line);
    if (cells.size() % 2 != 0 || cells.empty()) {
      fail("beamformer rows must hold 2M numbers");
    }
    w.w.push_back(read_complex_row(line, static_cast<int>(cells.size() / 2),
                                   "beamformer row"));
  }
  if (w.w.empty()) fail("beamformer file '" + path + "' is empty");
  for (const auto& wg : w.w) {
    if (wg.size() != w.w[0].size()) {
      fail("beamformer rows must all have the same length");
    }
  }
  return w;
}

}  // namespace rmmb
