#pragma once

#include "pier/scenario.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace pier {

/// One row per run; schema is stable and covered by a golden test.
void write_metrics_csv(std::ostream& out, const std::vector<Metrics>& metrics);
std::string metrics_csv_header();

/// tick, robot, event, detail
void write_events_csv(std::ostream& out, const std::vector<EventRow>& events);

/// tick, kind, bytes (aggregated per tick and kind)
void write_volume_csv(std::ostream& out, const VolumeLedger& ledger);

/// Rendezvous summary including the grid-oracle comparison.
void write_result_json(std::ostream& out, const Metrics& metrics);

/// Per-strategy mean/std table (batch runs).
void write_aggregate_csv(std::ostream& out, const std::vector<AggregateRow>& rows);

/// World, trajectories, topological nodes and the selected/optimal points.
void write_svg(std::ostream& out, const Simulation& sim);

/// Write all standard outputs of one run into a directory.
void write_run_outputs(const std::string& dir, const Metrics& metrics, const Simulation& sim,
                       bool render_svg);

}  // namespace pier
