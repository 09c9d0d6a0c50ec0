#include "bfc/io.hpp"

#include "bfc/errors.hpp"

#include <fmt/format.h>
#include <openssl/evp.h>

#include <algorithm>
#include <fstream>
#include <memory>

namespace bfc {

namespace fs = std::filesystem;
using nlohmann::json;

std::string sha256_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError(fmt::format("cannot read '{}'", path.string()));
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) throw NumericalError("SHA-256 init failed");
  char buf[1 << 14];
  while (in) {
    in.read(buf, sizeof buf);
    if (in.gcount() > 0) EVP_DigestUpdate(ctx.get(), buf, static_cast<std::size_t>(in.gcount()));
  }
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx.get(), digest, &len);
  std::string hex;
  hex.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) hex += fmt::format("{:02x}", digest[i]);
  return hex;
}

OutputWriter::OutputWriter(fs::path directory) : dir_(std::move(directory)) {
  std::error_code ec;
  fs::create_directories(dir_, ec);
  if (ec || !fs::is_directory(dir_)) {
    throw ValidationError(fmt::format("output directory '{}' cannot be created: {}", dir_.string(), ec.message()));
  }
}

void OutputWriter::write(const std::string& name, const std::string& content) {
  const fs::path path = dir_ / name;
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << content;
  out.close();
  if (!out) throw ValidationError(fmt::format("cannot write '{}'", path.string()));
  if (std::find(files_.begin(), files_.end(), name) == files_.end()) files_.push_back(name);
}

void OutputWriter::write_manifest(const json& metadata) {
  json files = json::array();
  for (const auto& name : files_) {
    const fs::path path = dir_ / name;
    files.push_back({{"name", name}, {"bytes", fs::file_size(path)}, {"sha256", sha256_file(path)}});
  }
  json manifest = metadata;
  manifest["files"] = files;
  write("manifest.json", manifest.dump(2) + "\n");
}

std::string scalar_csv(const Domain& d, const ScalarField& f) {
  check_shape(f, d);
  std::string s = "i,j,x,y,value\n";
  for (int i = 0; i < d.nx(); ++i) {
    for (int j = 0; j < d.ny(); ++j) {
      const auto c = d.cell_center(i, j);
      s += fmt::format("{},{},{},{},{}\n", i, j, c.x(), c.y(), f.values[d.cell_index(i, j)]);
    }
  }
  return s;
}

std::string velocity_csv(const Domain& d, const VelocityField& z, int component) {
  check_shape(z, d);
  std::string s = "i,j,x,y,value\n";
  for (int i = 0; i < d.nx(); ++i) {
    for (int j = 0; j < d.ny(); ++j) {
      const auto c = d.cell_center(i, j);
      const double value = component == 0
                               ? 0.5 * (z.values[d.u_index(i, j + 1)] + z.values[d.u_index(i + 1, j + 1)])
                               : 0.5 * (z.values[d.v_index(i + 1, j)] + z.values[d.v_index(i + 1, j + 1)]);
      s += fmt::format("{},{},{},{},{}\n", i, j, c.x(), c.y(), value);
    }
  }
  return s;
}

std::string boundary_csv(const Domain& d, const BoundaryFunction& f, double dt) {
  check_shape(f, d);
  const auto& ids = d.part_faces(f.part);
  std::string s = "face_id,s,t,value\n";
  for (int t = 0; t < f.num_times; ++t) {
    for (int k = 0; k < f.num_faces; ++k) {
      const auto& face = d.faces()[ids[k]];
      s += fmt::format("{},{},{},{}\n", face.id, face.arclength, t * dt, f.at(t, k));
    }
  }
  return s;
}

std::string face_time_csv(const Domain& d, const BoundaryFunction& f, double dt) {
  check_shape(f, d);
  const auto& ids = d.part_faces(f.part);
  std::string s = "face_id,t,value\n";
  for (int t = 0; t < f.num_times; ++t) {
    for (int k = 0; k < f.num_faces; ++k) s += fmt::format("{},{},{}\n", d.faces()[ids[k]].id, t * dt, f.at(t, k));
  }
  return s;
}

std::string convergence_csv(const std::vector<IterationRecord>& history) {
  std::string s = "iter,J,residual,step_size,frac_lower,frac_upper,frac_interior\n";
  for (const auto& r : history) {
    s += fmt::format("{},{},{},{},{},{},{}\n", r.iter, r.J, r.residual, r.step_size, r.frac_lower, r.frac_upper,
                     r.frac_interior);
  }
  return s;
}

std::string energy_csv(const StateTrajectory& traj) {
  std::string s = "step,t,kinetic,thermal,max_divergence,cfl\n";
  for (int m = 0; m <= traj.num_steps(); ++m) {
    const double cfl = m == 0 ? 0.0 : traj.cfl[m - 1];
    s += fmt::format("{},{},{},{},{},{}\n", m, m * traj.dt, traj.kinetic_energy[m], traj.thermal_energy[m],
                     traj.max_divergence[m], cfl);
  }
  return s;
}

json to_json(const GradientCheckReport& report) {
  json rows = json::array();
  for (const auto& r : report.rows) {
    rows.push_back({{"epsilon", r.epsilon},
                    {"finite_difference", r.finite_difference},
                    {"adjoint", r.adjoint},
                    {"relative_error", r.error},
                    {"roundoff_estimate", r.roundoff},
                    {"observed_order", r.observed_order},
                    {"above_floor", r.above_floor}});
  }
  return {{"J", report.cost},
          {"rows", rows},
          {"min_error", report.min_error},
          {"order_ok", report.order_ok},
          {"result", report.passed ? "PASS" : "FAIL"}};
}

json to_json(const SwitchingReport& report) {
  auto part = [](const PartSwitching& p) {
    return json{{"positive", p.positive}, {"negative", p.negative}, {"tie", p.tie}, {"agreement", p.agreement}};
  };
  return {{"tol", report.tol},
          {"v1", part(report.pressure)},
          {"v2", part(report.heat_flux)},
          {"agreement", report.agreement},
          {"bang_bang_verified", report.bang_bang_verified}};
}

}  // namespace bfc
