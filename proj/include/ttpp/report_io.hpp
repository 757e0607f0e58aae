#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "ttpp/metrics.hpp"
#include "ttpp/training.hpp"

namespace ttpp {

/// Methods × horizons table: header "method,<horizon labels>,Avg".
struct ReportTable {
  std::vector<std::string> columns;  // horizon labels followed by "Avg"
  struct Row {
    std::string method;
    std::vector<double> values;
    friend bool operator==(const Row&, const Row&) = default;
  };
  std::vector<Row> rows;

  void add(const std::string& method, const HorizonReport& report);
  friend bool operator==(const ReportTable&, const ReportTable&) = default;
};

std::string report_to_csv(const ReportTable& table);
ReportTable report_from_csv(std::string_view text);

/// "epoch,L_c,L_r,total,acc_h1".
std::string history_to_csv(const History& history);
History history_from_csv(std::string_view text);

struct AttentionRecord {
  std::string video_id;
  std::size_t t = 0;  // index of the query chunk
  std::size_t head = 0;
  std::size_t memory_pos = 0;  // absolute chunk index of the memory element
  double weight = 0.0;

  friend bool operator==(const AttentionRecord&, const AttentionRecord&) = default;
};

/// "video_id,t,head,memory_pos,weight".
std::string attention_to_csv(const std::vector<AttentionRecord>& records);
std::vector<AttentionRecord> attention_from_csv(std::string_view text);

/// Attention weights of every head for each window in `seq` (TTM models only).
std::vector<AttentionRecord> dump_attention(const Model& model, const FeatureSequence& seq);

std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, std::string_view text);

}  // namespace ttpp
