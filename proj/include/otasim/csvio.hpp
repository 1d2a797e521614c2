#pragma once

#include <string>
#include <vector>

#include "otasim/pipeline.hpp"

namespace otasim::csvio {

/// Column contract, fixed order:
/// experiment_id,M,train_snr_db,test_snr_db,drift_time_s,trial_id,accuracy,
/// p_final,sigma_n2,energy_total_j
/// NaN / absent optionals serialize as empty fields; the file is
/// newline-terminated UTF-8 and byte-deterministic for a given row list.
extern const char* kHeader;

std::string to_csv(const std::vector<pipeline::SweepRow>& rows);
void emit_csv(const std::vector<pipeline::SweepRow>& rows, const std::string& path);

/// Strict reader for the same schema; errors carry the 1-based line number.
std::vector<pipeline::SweepRow> parse_csv(const std::string& path);

}  // namespace otasim::csvio
