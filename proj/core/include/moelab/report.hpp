#pragma once

#include <string>
#include <vector>

#include "moelab/harness.hpp"

namespace moelab {

/// Serialized report bodies; emit_reports writes them to files. Kept as
/// strings so determinism tests can compare bytes without touching disk.
std::string metrics_json(const RunResult& result);
std::string loss_trace_csv(const RunResult& result);
std::string embeddings_csv(const RunResult& result);
/// One CSV per MoE-bearing model layer, paired with its file stem
/// ("routing_layer<i>"). Headers are emitted even when no evaluation ran.
std::vector<std::pair<std::string, std::string>> routing_csvs(const RunResult& result);
std::string ablation_csv(const std::vector<AblationRow>& rows);

/// Writes metrics.json, loss_trace.csv, embeddings_final.csv and the
/// routing_layer<i>.csv files into out_dir (created if missing).
void emit_reports(const RunResult& result, const std::string& out_dir);

/// Writes ablation.csv plus one subdirectory of full reports per row.
void emit_ablation_reports(const std::vector<AblationRow>& rows, const std::string& out_dir);

}  // namespace moelab
