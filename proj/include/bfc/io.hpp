#pragma once

#include "bfc/adjoint.hpp"
#include "bfc/grid.hpp"
#include "bfc/optimizer.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace bfc {

/// Hex SHA-256 of a file's bytes.
std::string sha256_file(const std::filesystem::path& path);

/// Collects the files written by one command and emits manifest.json.
class OutputWriter {
 public:
  /// Creates the directory; throws ValidationError when it cannot be written.
  explicit OutputWriter(std::filesystem::path directory);

  const std::filesystem::path& directory() const { return dir_; }

  /// Writes text to a file under the directory and records it.
  void write(const std::string& name, const std::string& content);

  /// manifest.json: file list with checksums plus the given metadata.
  void write_manifest(const nlohmann::json& metadata);
  const std::vector<std::string>& files() const { return files_; }

 private:
  std::filesystem::path dir_;
  std::vector<std::string> files_;
};

// CSV renderers. Numbers use the shortest round-trip form so output is
// deterministic and lossless.

/// `i,j,x,y,value` at cell centers.
std::string scalar_csv(const Domain& d, const ScalarField& f);
/// `i,j,x,y,value` of one velocity component interpolated to cell centers (0: x, 1: y).
std::string velocity_csv(const Domain& d, const VelocityField& z, int component);
/// `face_id,s,t,value`, one row per face and slot; t is the slot start time.
std::string boundary_csv(const Domain& d, const BoundaryFunction& f, double dt);
/// `face_id,t,value` for gradients and switching functions.
std::string face_time_csv(const Domain& d, const BoundaryFunction& f, double dt);
/// `iter,J,residual,step_size,frac_lower,frac_upper,frac_interior`.
std::string convergence_csv(const std::vector<IterationRecord>& history);
/// `step,t,kinetic,thermal,max_divergence,cfl`.
std::string energy_csv(const StateTrajectory& traj);

nlohmann::json to_json(const GradientCheckReport& report);
nlohmann::json to_json(const SwitchingReport& report);

}  // namespace bfc
