#include "uavassoc/features.hpp"

#include <algorithm>
#include <numeric>
#include <ostream>
#include <sstream>

namespace uavassoc {

CandidateSet select_candidates(const LinkTable& links, int zeta) {
  if (zeta < 2 || zeta % 2 != 0) throw Error(ErrorKind::InvalidConfig, "zeta must be even and >= 2");
  const std::size_t half = static_cast<std::size_t>(zeta / 2);
  if (links.size() < half) {
    throw Error(ErrorKind::InsufficientBs,
                "need at least " + std::to_string(half) + " BSs, have " + std::to_string(links.size()));
  }
  std::vector<std::size_t> order(links.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  std::vector<std::size_t> closest = order;
  std::stable_sort(closest.begin(), closest.end(),
                   [&](std::size_t a, std::size_t b) { return links[a].r_m < links[b].r_m; });
  closest.resize(half);

  std::vector<std::size_t> strongest = order;
  std::stable_sort(strongest.begin(), strongest.end(),
                   [&](std::size_t a, std::size_t b) { return links[a].rx_power_w > links[b].rx_power_w; });
  strongest.resize(half);

  CandidateSet set;
  for (std::size_t id : closest) {
    const bool also = std::find(strongest.begin(), strongest.end(), id) != strongest.end();
    set.ids.push_back(id);
    set.provenance.push_back(also ? Provenance::Both : Provenance::Closest);
  }
  for (std::size_t id : strongest) {
    if (std::find(closest.begin(), closest.end(), id) != closest.end()) continue;
    set.ids.push_back(id);
    set.provenance.push_back(Provenance::Strongest);
  }
  return set;
}

CandidateSet select_candidates(const Environment& env, const RadioConfig& radio, Vec2 uav_xy, double uav_height_m,
                               int zeta) {
  return select_candidates(compute_links(env, radio, uav_xy, uav_height_m), zeta);
}

std::optional<std::size_t> StateFeatures::current_slot() const {
  for (std::size_t i = 0; i < o_zeta.size(); ++i) {
    if (o_zeta[i] != 0) return i;
  }
  return std::nullopt;
}

StateFeatures build_state(const LinkTable& links, const Environment& env, const RadioConfig& radio,
                          const CandidateSet& candidates, std::optional<std::size_t> current_assoc,
                          bool is_last_step, int xi) {
  if (candidates.size() == 0) throw Error(ErrorKind::InvalidConfig, "empty candidate set");
  if (xi < 1) throw Error(ErrorKind::InvalidConfig, "xi must be >= 1");
  StateFeatures s;
  s.xi = xi;
  s.candidate_ids = candidates.ids;
  s.gamma_m = links.uav_height_m;
  s.t_flag = is_last_step ? 1 : 0;
  const std::size_t rows = candidates.size();
  const std::size_t cols = static_cast<std::size_t>(xi);
  s.p_zeta.resize(rows);
  s.o_zeta.assign(rows, 0);
  s.f_zeta.assign(rows * cols, 0.0);
  s.l_zeta.assign(rows * cols, 0);
  s.mask.assign(rows * cols, 0);
  s.row_count.assign(rows, 0);

  for (std::size_t i = 0; i < rows; ++i) {
    const std::size_t id = candidates.ids[i];
    s.p_zeta[i] = links[id].rx_power_w;
    if (current_assoc && *current_assoc == id) s.o_zeta[i] = 1;

    const RingSector sector = sector_towards(links, env, radio, id);
    std::vector<std::size_t> members = lobe_members(links, sector, id);
    if (members.size() > cols) {
      ++s.truncated_rows;
      members.resize(cols);
    }
    s.row_count[i] = static_cast<int>(members.size());
    for (std::size_t j = 0; j < members.size(); ++j) {
      const LinkBudget& l = links[members[j]];
      s.f_zeta[s.at(i, j)] = l.r_m;
      s.l_zeta[s.at(i, j)] = l.los == Channel::Los ? 1 : 0;
      s.mask[s.at(i, j)] = 1;
    }
  }
  return s;
}

void write_state_csv_header(std::ostream& os) {
  os << "gamma_m,t_flag,slot,bs_id,p_w,o,n_interferers,distances_m,los_flags\n";
}

void write_state_csv(std::ostream& os, const StateFeatures& s) {
  std::ostringstream out;
  out.precision(10);
  for (std::size_t i = 0; i < s.rows(); ++i) {
    out << s.gamma_m << ',' << s.t_flag << ',' << i << ',' << s.candidate_ids[i] << ',' << s.p_zeta[i] << ','
        << s.o_zeta[i] << ',' << s.row_count[i] << ',';
    for (int j = 0; j < s.row_count[i]; ++j) out << (j ? ";" : "") << s.f_zeta[s.at(i, static_cast<std::size_t>(j))];
    out << ',';
    for (int j = 0; j < s.row_count[i]; ++j) out << (j ? ";" : "") << s.l_zeta[s.at(i, static_cast<std::size_t>(j))];
    out << '\n';
  }
  os << out.str();
}

}  // namespace uavassoc
