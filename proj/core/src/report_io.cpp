#include "reidrank/report_io.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

#include "reidrank/error.hpp"

namespace reidrank {
namespace {

using Json = nlohmann::ordered_json;

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

Json parameters_or_empty(std::string_view text) {
  if (text.empty()) return Json::object();
  try {
    return Json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kInvalidSet, std::string("parameters are not valid JSON: ") + e.what());
  }
}

std::unordered_map<std::uint32_t, std::uint32_t> index_by_record(const EmbeddingSet& set) {
  std::unordered_map<std::uint32_t, std::uint32_t> out;
  out.reserve(set.size());
  for (std::size_t i = 0; i < set.size(); ++i) {
    out.emplace(set.records[i].record_id, static_cast<std::uint32_t>(i));
  }
  return out;
}

template <typename T>
T parse_field(std::string_view text, std::size_t line_no) {
  T value{};
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size()) {
    fail(ErrorCode::kInvalidSet, "rank CSV line " + std::to_string(line_no) + ": cannot parse '" +
                                     std::string(text) + "'");
  }
  return value;
}

std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      fields.push_back(line.substr(start));
      return fields;
    }
    fields.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

}  // namespace

void write_rank_csv(std::ostream& out, std::span<const RankList> lists,
                    const EmbeddingSet& probes, const EmbeddingSet& gallery) {
  out << kRankCsvHeader << '\n';
  for (const auto& list : lists) {
    const auto probe_id = probes.records.at(list.probe_index).record_id;
    std::size_t rank = 1;
    for (const auto& e : list.entries) {
      const auto& g = gallery.records.at(e.gallery_index);
      out << probe_id << ',' << rank++ << ',' << g.record_id << ',' << g.person_label << ','
          << format_double(e.distance) << '\n';
    }
  }
  if (!out) fail(ErrorCode::kIo, "failed writing rank CSV");
}

std::string rank_lists_json(std::span<const RankList> lists, const EmbeddingSet& probes,
                            const EmbeddingSet& gallery, std::string_view parameters_json) {
  Json doc;
  doc["parameters"] = parameters_or_empty(parameters_json);
  doc["probe_tag"] = probes.dataset_tag;
  doc["gallery_tag"] = gallery.dataset_tag;
  Json arr = Json::array();
  for (const auto& list : lists) {
    const auto& p = probes.records.at(list.probe_index);
    Json entry;
    entry["probe_id"] = p.record_id;
    entry["probe_label"] = p.person_label;
    Json ranking = Json::array();
    for (const auto& e : list.entries) {
      const auto& g = gallery.records.at(e.gallery_index);
      ranking.push_back({{"gallery_record_id", g.record_id},
                         {"person_label", g.person_label},
                         {"distance", e.distance}});
    }
    entry["ranking"] = std::move(ranking);
    arr.push_back(std::move(entry));
  }
  doc["lists"] = std::move(arr);
  return doc.dump(2) + "\n";
}

std::vector<RankList> read_rank_csv(std::istream& in, const EmbeddingSet& probes,
                                    const EmbeddingSet& gallery) {
  const auto probe_index = index_by_record(probes);
  const auto gallery_index = index_by_record(gallery);

  std::string line;
  if (!std::getline(in, line) || line != kRankCsvHeader) {
    fail(ErrorCode::kInvalidSet, "rank CSV is missing the expected header");
  }
  std::vector<RankList> lists;
  std::unordered_map<std::uint32_t, std::size_t> list_of_probe;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto fields = split_csv(line);
    if (fields.size() != 5) {
      fail(ErrorCode::kInvalidSet, "rank CSV line " + std::to_string(line_no) + " has " +
                                       std::to_string(fields.size()) + " fields, expected 5");
    }
    const auto probe_id = parse_field<std::uint32_t>(fields[0], line_no);
    const auto rank = parse_field<std::size_t>(fields[1], line_no);
    const auto gallery_id = parse_field<std::uint32_t>(fields[2], line_no);
    const auto distance = parse_field<double>(fields[4], line_no);

    const auto p = probe_index.find(probe_id);
    const auto g = gallery_index.find(gallery_id);
    if (p == probe_index.end() || g == gallery_index.end()) {
      fail(ErrorCode::kInvalidSet,
           "rank CSV line " + std::to_string(line_no) + " references an unknown record id");
    }
    auto [it, inserted] = list_of_probe.try_emplace(probe_id, lists.size());
    if (inserted) lists.push_back({p->second, {}});
    auto& list = lists[it->second];
    if (rank != list.entries.size() + 1) {
      fail(ErrorCode::kInvalidSet, "rank CSV line " + std::to_string(line_no) +
                                       ": ranks must be consecutive from 1");
    }
    list.entries.push_back({g->second, distance});
  }
  return lists;
}

std::string eval_report_json(const EvalReport& report, const EmbeddingSet& probes,
                             std::string_view parameters_json) {
  Json doc;
  doc["parameters"] = parameters_or_empty(parameters_json);
  doc["probe_count"] = report.probe_count;
  doc["map"] = report.map;
  doc["rank1"] = report.cmc.empty() ? 0.0 : report.cmc.front();
  doc["cmc"] = report.cmc;
  Json per_probe = Json::array();
  for (std::size_t i = 0; i < report.per_probe_ap.size(); ++i) {
    const auto id = i < probes.size() ? probes.records[i].record_id : static_cast<std::uint32_t>(i);
    per_probe.push_back({{"probe_id", id}, {"ap", report.per_probe_ap[i]}});
  }
  doc["per_probe_ap"] = std::move(per_probe);
  return doc.dump(2) + "\n";
}

void write_ap_csv(std::ostream& out, const EvalReport& report, const EmbeddingSet& probes) {
  out << "probe_id,average_precision\n";
  for (std::size_t i = 0; i < report.per_probe_ap.size(); ++i) {
    const auto id = i < probes.size() ? probes.records[i].record_id : static_cast<std::uint32_t>(i);
    out << id << ',' << format_double(report.per_probe_ap[i]) << '\n';
  }
}

void write_cmc_dat(std::ostream& out, const EvalReport& report) {
  out << "# rank cmc\n";
  for (std::size_t r = 0; r < report.cmc.size(); ++r) {
    out << (r + 1) << ' ' << format_double(report.cmc[r]) << '\n';
  }
}

DatasetManifest parse_manifest_json(std::string_view text) {
  DatasetManifest m;
  try {
    const auto doc = nlohmann::json::parse(text);
    m.dataset_tag = doc.at("dataset_tag").get<std::string>();
    m.identity_count = doc.at("identity_count").get<std::size_t>();
    m.image_count = doc.at("image_count").get<std::size_t>();
    for (const auto& pair : doc.at("labels")) {
      if (!pair.is_array() || pair.size() != 2) {
        fail(ErrorCode::kInvalidManifest, "manifest labels must be [record_id, raw_label] pairs");
      }
      m.labels.push_back({pair[0].get<std::uint32_t>(), pair[1].get<std::uint32_t>()});
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kInvalidManifest, std::string("malformed manifest JSON: ") + e.what());
  }
  return m;
}

std::string manifest_json(const DatasetManifest& manifest) {
  Json doc;
  doc["dataset_tag"] = manifest.dataset_tag;
  doc["identity_count"] = manifest.identity_count;
  doc["image_count"] = manifest.image_count;
  Json labels = Json::array();
  for (const auto& e : manifest.labels) labels.push_back({e.record_id, e.raw_label});
  doc["labels"] = std::move(labels);
  return doc.dump() + "\n";
}

std::string combined_manifest_json(const CombinedManifest& combined,
                                   std::span<const DatasetManifest> sources,
                                   std::string_view parameters_json) {
  Json doc;
  doc["parameters"] = parameters_or_empty(parameters_json);
  doc["dataset_tag"] = combined.dataset_tag;
  doc["identity_count"] = combined.identity_count;
  doc["image_count"] = combined.image_count;
  Json src = Json::array();
  for (const auto& m : sources) {
    src.push_back({{"dataset_tag", m.dataset_tag},
                   {"identity_count", m.identity_count},
                   {"image_count", m.image_count}});
  }
  doc["sources"] = std::move(src);
  Json records = Json::array();
  for (const auto& r : combined.records) {
    records.push_back({r.dataset_tag, r.record_id, r.raw_label, r.combined_label});
  }
  doc["records"] = std::move(records);
  return doc.dump(2) + "\n";
}

void write_mapping_csv(std::ostream& out, const CombinedManifest& combined) {
  std::vector<const std::pair<const std::pair<std::string, std::uint32_t>, std::uint32_t>*> rows;
  rows.reserve(combined.mapping.size());
  for (const auto& entry : combined.mapping) rows.push_back(&entry);
  std::sort(rows.begin(), rows.end(), [](auto* a, auto* b) { return a->second < b->second; });
  out << "dataset_tag,raw_label,combined_label\n";
  for (const auto* r : rows) out << r->first.first << ',' << r->first.second << ',' << r->second << '\n';
}

}  // namespace reidrank
