#pragma once

#include <filesystem>
#include <iosfwd>
#include <vector>

#include "cortexfit/arap.hpp"
#include "cortexfit/displacement.hpp"
#include "cortexfit/measurement_model.hpp"
#include "cortexfit/mesh.hpp"
#include "cortexfit/volume.hpp"

namespace cortexfit {

/// Everything the fitting pipeline needs beyond its data inputs. Scanner
/// parameters and the table path are mandatory in config files; all other
/// keys default as below.
struct PipelineConfig {
  ScannerConfig scanner;                           // mandatory
  std::filesystem::path table_path;                // mandatory
  RegionParams priors = default_region_params();
  ProfileGrid profile;
  SearchGrid search;
  double sigma_s = 2.0;
  double sigma_e = 2.0;
  int max_iterations = 50;
  double rms_tolerance = 0.01;  // mm, on the gamma-weighted RMS displacement
  double pcg_tolerance = 1e-10;
  int pcg_max_iterations = 0;   // 0 = 30N
  TableAxes axes;               // used by table building
  int quadrature_order = 64;

  void validate() const;
};

/// Reads a `key = value` config file (dotted section prefixes, unknown keys
/// rejected). A relative table path resolves against the config file's
/// directory.
PipelineConfig read_pipeline_config(const std::filesystem::path& path);
void write_pipeline_config(const PipelineConfig& config, const std::filesystem::path& path);

struct FitReport {
  struct Iteration {
    double weighted_rms = 0.0;  // mm
    double mean_gamma = 0.0;
    double e_shape = 0.0;
  };
  std::vector<Iteration> iterations;
  double wall_time_s = 0.0;

  bool converged(double rms_tolerance) const {
    return !iterations.empty() && iterations.back().weighted_rms < rms_tolerance;
  }
};

/// Per-iteration metrics as a comma-separated table (wall time is not part of
/// the emitted table so that outputs stay byte-reproducible).
void write_report(const FitReport& report, std::ostream& out);

struct PipelineResult {
  LabeledSurfaceMesh mesh;
  FitReport report;
};

/// The outer alternation: recompute normals, sample profiles, estimate MAP
/// displacements, fit the surface under deformation constraints; iterated
/// until the gamma-weighted RMS displacement drops below the tolerance or
/// max_iterations is reached. Labels and connectivity of the template are
/// preserved.
PipelineResult run_pipeline(const CalibratedVolume& volume, const LabeledSurfaceMesh& tmpl,
                            const MeasurementModelTable& table, const PipelineConfig& config,
                            int threads = 0);

}  // namespace cortexfit
