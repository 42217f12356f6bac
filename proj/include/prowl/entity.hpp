#pragma once

#include <algorithm>
#include <set>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "prowl/datasets.hpp"
#include "prowl/parser.hpp"

namespace prowl {

// Entity-centric corpus: every document describes one subject entity; the
// extraction task labels each in-document mention with the relation it bears
// to the subject (or "Other").
//
// JSON-lines layout: the first line is a header object
//   {"relation_labels": [...], "type_labels": [...], "range": {"rel": "type"}}
// and every following line is one document
//   {"subject": ..., "sections": [{"title": ..., "sentences": [...]}],
//    "mentions": [{"id": ..., "section": ..., "sentence": 0,
//                  "nps": [...], "features": [...],
//                  "relation": "sideEffects", "type": "symptom"}]}
// Mention relation/type are gold annotations; absent or empty means
// unannotated.
struct EntityMention {
  std::string id;
  int doc = 0;  // index into documents
  std::string section;
  int sentence = 0;
  std::vector<std::string> nps;
  std::vector<std::string> features;
  std::string gold_relation;
  std::string gold_type;
};

struct EntityDoc {
  std::string subject;
  std::vector<std::pair<std::string, int>> sections;  // (title, sentence count)
};

struct EntityCorpus {
  std::vector<EntityDoc> documents;
  std::vector<EntityMention> mentions;
  std::vector<std::string> relation_labels;  // includes "Other"
  std::vector<std::string> type_labels;
  std::vector<std::pair<std::string, std::string>> range_map;  // relation -> type

  // Mention-pair indexes for the doc/title/sent constraint pools.
  std::vector<std::pair<int, int>> doc_pairs;
  std::vector<std::pair<int, int>> title_pairs;
  std::vector<std::pair<int, int>> sent_pairs;
};

namespace detail {

inline bool np_sets_intersect(const std::vector<std::string>& a,
                              const std::vector<std::string>& b) {
  for (const std::string& x : a)
    for (const std::string& y : b)
      if (x == y) return true;
  return false;
}

}  // namespace detail

inline EntityCorpus load_entity_corpus(const std::string& text) {
  EntityCorpus corpus;
  size_t start = 0;
  int line_no = 0;
  bool have_header = false;

  while (start < text.size()) {
    size_t end = text.find('\n', start);
    if (end == std::string::npos) end = text.size();
    std::string line = text.substr(start, end - start);
    start = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;

    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw std::runtime_error("corpus line " + std::to_string(line_no) + ": " + e.what());
    }

    auto fail = [&](const std::string& what) -> std::runtime_error {
      return std::runtime_error("corpus line " + std::to_string(line_no) + ": " + what);
    };

    if (!have_header) {
      if (!j.contains("relation_labels") || !j.contains("type_labels"))
        throw fail("header must define relation_labels and type_labels");
      corpus.relation_labels = j["relation_labels"].get<std::vector<std::string>>();
      corpus.type_labels = j["type_labels"].get<std::vector<std::string>>();
      if (j.contains("range"))
        for (auto it = j["range"].begin(); it != j["range"].end(); ++it)
          corpus.range_map.emplace_back(it.key(), it.value().get<std::string>());
      bool has_other = false;
      for (const std::string& l : corpus.relation_labels) has_other |= (l == "Other");
      if (!has_other) throw fail("relation_labels must include \"Other\"");
      have_header = true;
      continue;
    }

    if (!j.contains("subject")) throw fail("document missing subject");
    EntityDoc doc;
    doc.subject = j["subject"].get<std::string>();
    std::unordered_map<std::string, int> section_sentences;
    if (j.contains("sections")) {
      for (const auto& s : j["sections"]) {
        if (!s.contains("title")) throw fail("section missing title in " + doc.subject);
        std::string title = s["title"].get<std::string>();
        int nsent = s.contains("sentences") ? static_cast<int>(s["sentences"].size()) : 0;
        doc.sections.emplace_back(title, nsent);
        section_sentences[title] = nsent;
      }
    }
    int doc_idx = static_cast<int>(corpus.documents.size());
    corpus.documents.push_back(doc);

    if (!j.contains("mentions")) continue;
    for (const auto& m : j["mentions"]) {
      EntityMention mention;
      mention.doc = doc_idx;
      if (!m.contains("id") || !m.contains("section") || !m.contains("sentence"))
        throw fail("mention missing id/section/sentence in " + doc.subject);
      mention.id = m["id"].get<std::string>();
      mention.section = m["section"].get<std::string>();
      mention.sentence = m["sentence"].get<int>();
      auto sec = section_sentences.find(mention.section);
      if (sec == section_sentences.end())
        throw fail("mention " + mention.id + " references unknown section '" +
                   mention.section + "'");
      if (mention.sentence < 0 || mention.sentence >= sec->second)
        throw fail("mention " + mention.id + " references sentence " +
                   std::to_string(mention.sentence) + " outside section '" + mention.section +
                   "'");
      if (m.contains("nps")) mention.nps = m["nps"].get<std::vector<std::string>>();
      if (m.contains("features")) mention.features = m["features"].get<std::vector<std::string>>();
      if (m.contains("relation")) mention.gold_relation = m["relation"].get<std::string>();
      if (m.contains("type")) mention.gold_type = m["type"].get<std::string>();
      if (!mention.gold_relation.empty()) {
        bool known = false;
        for (const std::string& l : corpus.relation_labels) known |= (l == mention.gold_relation);
        if (!known) throw fail("mention " + mention.id + " has unknown relation label '" +
                               mention.gold_relation + "'");
      }
      corpus.mentions.push_back(std::move(mention));
    }
  }
  if (!have_header) throw std::runtime_error("corpus has no header line");

  // Pair indexes. doc: same document, NP sets intersect. title: different
  // documents, equal section titles, NP sets intersect. sent: same sentence
  // of the same section, all unordered pairs.
  for (size_t i = 0; i < corpus.mentions.size(); ++i) {
    for (size_t k = i + 1; k < corpus.mentions.size(); ++k) {
      const EntityMention& a = corpus.mentions[i];
      const EntityMention& b = corpus.mentions[k];
      int ia = static_cast<int>(i), ik = static_cast<int>(k);
      if (a.doc == b.doc) {
        if (detail::np_sets_intersect(a.nps, b.nps)) corpus.doc_pairs.emplace_back(ia, ik);
        if (a.section == b.section && a.sentence == b.sentence)
          corpus.sent_pairs.emplace_back(ia, ik);
      } else {
        if (a.section == b.section && detail::np_sets_intersect(a.nps, b.nps))
          corpus.title_pairs.emplace_back(ia, ik);
      }
    }
  }
  return corpus;
}

// hasFeature facts for every mention, usable by both the relation and the
// type classifier templates.
inline std::string emit_mention_facts(const EntityCorpus& corpus) {
  std::string out;
  for (const EntityMention& m : corpus.mentions)
    for (const std::string& f : m.features)
      out += "hasFeature\t" + safe_token(m.id) + "\t" + safe_token(f) + "\n";
  return out;
}

// Ranked example files: `rank<TAB>query<TAB>+ans<TAB>-ans...`, one per line.
// Returns the top_k lowest ranks (stable on ties). top_k < 0 keeps all.
inline std::vector<TrainingExample> load_ranked_examples(const std::string& text,
                                                         SymbolTable& syms, long top_k) {
  struct Row {
    long rank;
    size_t order;
    TrainingExample ex;
  };
  std::vector<Row> rows;
  size_t start = 0;
  int line_no = 0;
  while (start < text.size()) {
    size_t end = text.find('\n', start);
    if (end == std::string::npos) end = text.size();
    std::string line = text.substr(start, end - start);
    start = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    size_t tab = line.find('\t');
    if (tab == std::string::npos)
      throw std::runtime_error("ranked example line " + std::to_string(line_no) +
                               ": missing rank column");
    Row row;
    try {
      row.rank = std::stol(line.substr(0, tab));
    } catch (const std::exception&) {
      throw std::runtime_error("ranked example line " + std::to_string(line_no) +
                               ": bad rank '" + line.substr(0, tab) + "'");
    }
    row.order = rows.size();
    auto parsed = parse_examples(line.substr(tab + 1), syms);
    if (parsed.size() != 1)
      throw std::runtime_error("ranked example line " + std::to_string(line_no) +
                               ": expected one example");
    row.ex = std::move(parsed[0]);
    rows.push_back(std::move(row));
  }
  std::stable_sort(rows.begin(), rows.end(),
                   [](const Row& a, const Row& b) { return a.rank < b.rank; });
  if (top_k >= 0 && rows.size() > static_cast<size_t>(top_k)) rows.resize(static_cast<size_t>(top_k));
  std::vector<TrainingExample> out;
  out.reserve(rows.size());
  for (Row& r : rows) out.push_back(std::move(r.ex));
  return out;
}

}  // namespace prowl
