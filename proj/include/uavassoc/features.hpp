#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <vector>

#include "uavassoc/env.hpp"
#include "uavassoc/radio.hpp"

namespace uavassoc {

enum class Provenance { Closest, Strongest, Both };

/// Candidate BSs in action-index order: the zeta/2 closest (nearest first),
/// then the strongest not already included (strongest first). Ties by BS id.
struct CandidateSet {
  std::vector<std::size_t> ids;
  std::vector<Provenance> provenance;

  std::size_t size() const { return ids.size(); }
};

CandidateSet select_candidates(const LinkTable& links, int zeta);

/// Convenience overload that ray traces every BS first.
CandidateSet select_candidates(const Environment& env, const RadioConfig& radio, Vec2 uav_xy, double uav_height_m,
                               int zeta);

/// Observation for one timestep. Matrices are row-major with `xi` columns,
/// one row per candidate; padded entries are zero and masked out.
struct StateFeatures {
  int xi = 0;
  std::vector<std::size_t> candidate_ids;
  std::vector<double> p_zeta;  // omni received power, W
  std::vector<int> o_zeta;     // current association flag
  std::vector<double> f_zeta;  // interferer horizontal distances, m
  std::vector<int> l_zeta;     // interferer LoS flags
  std::vector<int> mask;       // 1 for a real interferer
  std::vector<int> row_count;  // real interferers per row
  double gamma_m = 0.0;
  int t_flag = 0;
  int truncated_rows = 0;  // rows whose lobe held more than xi interferers

  std::size_t rows() const { return candidate_ids.size(); }
  std::size_t at(std::size_t row, std::size_t col) const { return row * static_cast<std::size_t>(xi) + col; }
  std::optional<std::size_t> current_slot() const;
};

StateFeatures build_state(const LinkTable& links, const Environment& env, const RadioConfig& radio,
                          const CandidateSet& candidates, std::optional<std::size_t> current_assoc,
                          bool is_last_step, int xi);

/// One CSV row per candidate:
/// gamma_m,t_flag,slot,bs_id,p_w,o,n_interferers,distances_m,los_flags
/// where the last two columns are ';'-separated lists.
void write_state_csv_header(std::ostream& os);
void write_state_csv(std::ostream& os, const StateFeatures& s);

}  // namespace uavassoc
