#include "pairforge/corpus.hpp"

#include <unordered_set>

#include "pairforge/text.hpp"

namespace pairforge {

namespace {

const char* kAllowedFields[] = {"id", "text", "source", "quality_score", "meta"};

void check_record(const Json& j) {
  if (!j.is_object()) {
    throw std::invalid_argument("record is not a JSON object");
  }
  for (const auto& [key, value] : j.items()) {
    bool known = false;
    for (const char* f : kAllowedFields) {
      if (key == f) {
        known = true;
        break;
      }
    }
    if (!known) {
      throw std::invalid_argument("unknown field \"" + key + "\"");
    }
    (void)value;
  }
  for (const char* f : {"id", "text", "source"}) {
    if (!j.contains(f) || !j.at(f).is_string()) {
      throw std::invalid_argument(std::string("field \"") + f +
                                  "\" missing or not a string");
    }
  }
}

}  // namespace

Json UgcDocument::to_json() const {
  Json j;
  j["id"] = id;
  j["text"] = text;
  j["source"] = source;
  if (quality_score) {
    j["quality_score"] = *quality_score;
  }
  if (!meta.empty()) {
    Json m = Json::object();
    for (const auto& [k, v] : meta) m[k] = v;
    j["meta"] = std::move(m);
  }
  return j;
}

UgcDocument UgcDocument::from_json(const Json& j) {
  check_record(j);
  UgcDocument doc;
  doc.id = j.at("id").get<std::string>();
  doc.text = j.at("text").get<std::string>();
  doc.source = j.at("source").get<std::string>();
  if (doc.id.empty()) {
    throw std::invalid_argument("empty id");
  }
  if (trim(doc.text).empty()) {
    throw std::invalid_argument("text is empty after trimming");
  }
  if (j.contains("quality_score")) {
    const Json& qs = j.at("quality_score");
    if (!qs.is_number_integer()) {
      throw std::invalid_argument("quality_score must be an integer");
    }
    int score = qs.get<int>();
    if (score < 1 || score > 5) {
      throw std::invalid_argument("quality_score out of range 1..5");
    }
    doc.quality_score = score;
  }
  if (j.contains("meta")) {
    const Json& meta = j.at("meta");
    if (!meta.is_object()) {
      throw std::invalid_argument("meta must be an object");
    }
    for (const auto& [k, v] : meta.items()) {
      if (!v.is_string()) {
        throw std::invalid_argument("meta values must be strings");
      }
      doc.meta[k] = v.get<std::string>();
    }
  }
  return doc;
}

LoadResult load_corpus(const std::string& path, bool skip_malformed) {
  LoadResult result;
  std::unordered_set<std::string> seen_ids;
  for_each_jsonl_line(path, [&](std::size_t line_number, const std::string& line) {
    if (trim(line).empty()) return;
    std::string error;
    try {
      Json parsed = Json::parse(line);
      UgcDocument doc = UgcDocument::from_json(parsed);
      if (!seen_ids.insert(doc.id).second) {
        throw std::invalid_argument("duplicate id \"" + doc.id + "\"");
      }
      result.docs.push_back(std::move(doc));
      return;
    } catch (const std::exception& e) {
      error = e.what();
    }
    if (!skip_malformed) {
      throw CorpusError(path + ":" + std::to_string(line_number) + ": " + error);
    }
    result.skipped.push_back({line_number, error});
  });
  return result;
}

void save_corpus(const std::filesystem::path& path,
                 const std::vector<UgcDocument>& docs) {
  std::vector<Json> records;
  records.reserve(docs.size());
  for (const UgcDocument& doc : docs) {
    records.push_back(doc.to_json());
  }
  write_jsonl(path, records);
}

std::vector<UgcDocument> dedup(const std::vector<UgcDocument>& docs) {
  std::vector<UgcDocument> out;
  std::unordered_set<std::string> seen;
  for (const UgcDocument& doc : docs) {
    if (seen.insert(normalize_whitespace(doc.text)).second) {
      out.push_back(doc);
    }
  }
  return out;
}

std::vector<UgcDocument> select_by_quality(const std::vector<UgcDocument>& docs,
                                           int min_score) {
  std::vector<UgcDocument> out;
  for (const UgcDocument& doc : docs) {
    if (!doc.quality_score) {
      throw CorpusError("document \"" + doc.id +
                        "\" has no quality_score; run the quality stage first");
    }
    if (*doc.quality_score >= min_score) {
      out.push_back(doc);
    }
  }
  return out;
}

}  // namespace pairforge
