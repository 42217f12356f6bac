#pragma once

#include <algorithm>
#include <set>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "prowl/parser.hpp"
#include "prowl/rng.hpp"

namespace prowl {

// Tokens written into fact/example files must not look like variables.
// Prefixing with '_' is bijective (originals that already start with '_'
// get another one), so dataset statistics are unaffected.
inline std::string safe_token(const std::string& s) {
  if (s.empty()) return "_";
  if ((s[0] >= 'A' && s[0] <= 'Z') || s[0] == '_') return "_" + s;
  return s;
}

inline std::string unsafe_token(const std::string& s) {
  if (!s.empty() && s[0] == '_') return s.substr(1);
  return s;
}

struct CitationDataset {
  struct Doc {
    std::string id;
    std::string label;
    std::vector<std::string> words;  // deduplicated, in file order
  };

  std::vector<Doc> docs;
  std::vector<std::pair<std::string, std::string>> links;  // kept links
  std::vector<std::string> labels;                         // sorted unique
  size_t vocabulary_size = 0;
  long dropped_links = 0;
  std::unordered_map<std::string, size_t> index;  // doc id -> position in docs
};

// Content lines are either `docId<TAB>word word ...<TAB>label` or the widely
// distributed layout `docId<TAB>v1<TAB>...<TAB>vN<TAB>label` with one column
// per vocabulary word (nonzero means present, named w<column>). Cites lines
// are `citing<TAB>cited`; links touching unknown documents are dropped and
// counted.
inline CitationDataset load_citation(const std::string& content, const std::string& cites) {
  CitationDataset ds;
  std::set<std::string> labels;
  std::set<std::string> vocab;
  size_t columns = 0;

  int line_no = 0;
  size_t start = 0;
  while (start < content.size()) {
    size_t end = content.find('\n', start);
    if (end == std::string::npos) end = content.size();
    std::string line = content.substr(start, end - start);
    start = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto fields = detail::split_tabs(line);
    if (fields.size() < 3)
      throw std::runtime_error("content line " + std::to_string(line_no) +
                               ": expected at least 3 tab-separated fields");
    CitationDataset::Doc doc;
    doc.id = fields[0];
    doc.label = fields.back();
    if (doc.id.empty() || doc.label.empty())
      throw std::runtime_error("content line " + std::to_string(line_no) +
                               ": empty document id or label");

    if (fields.size() == 3) {
      // space-separated word list
      std::unordered_set<std::string> seen;
      const std::string& text = fields[1];
      size_t wstart = 0;
      for (size_t i = 0; i <= text.size(); ++i) {
        if (i == text.size() || text[i] == ' ') {
          if (i > wstart) {
            std::string w = text.substr(wstart, i - wstart);
            if (seen.insert(w).second) doc.words.push_back(w);
          }
          wstart = i + 1;
        }
      }
    } else {
      if (columns == 0) columns = fields.size();
      if (fields.size() != columns)
        throw std::runtime_error("content line " + std::to_string(line_no) +
                                 ": inconsistent column count");
      for (size_t i = 1; i + 1 < fields.size(); ++i)
        if (fields[i] != "0") doc.words.push_back("w" + std::to_string(i - 1));
    }

    if (ds.index.count(doc.id))
      throw std::runtime_error("content line " + std::to_string(line_no) +
                               ": duplicate document id " + doc.id);
    labels.insert(doc.label);
    for (const std::string& w : doc.words) vocab.insert(w);
    ds.index.emplace(doc.id, ds.docs.size());
    ds.docs.push_back(std::move(doc));
  }
  if (ds.docs.empty()) throw std::runtime_error("empty citation dataset");

  line_no = 0;
  start = 0;
  while (start < cites.size()) {
    size_t end = cites.find('\n', start);
    if (end == std::string::npos) end = cites.size();
    std::string line = cites.substr(start, end - start);
    start = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto fields = detail::split_tabs(line);
    if (fields.size() != 2)
      throw std::runtime_error("cites line " + std::to_string(line_no) +
                               ": expected 2 tab-separated fields");
    if (ds.index.count(fields[0]) && ds.index.count(fields[1]))
      ds.links.emplace_back(fields[0], fields[1]);
    else
      ++ds.dropped_links;
  }

  ds.labels.assign(labels.begin(), labels.end());
  ds.vocabulary_size = vocab.size();
  return ds;
}

struct Split {
  std::vector<std::pair<std::string, std::string>> labeled;  // (doc, label)
  std::vector<std::string> unlabeled;
  std::vector<std::pair<std::string, std::string>> test;
  uint64_t seed = 0;
};

// Hold out `test_size` documents, cap the remaining training pool, then draw
// `per_class` labeled documents per label; the rest of the pool is unlabeled.
inline Split make_split(const CitationDataset& ds, int per_class, int test_size,
                        int train_cap, uint64_t seed) {
  if (static_cast<size_t>(per_class) * ds.labels.size() + static_cast<size_t>(test_size) >
      ds.docs.size())
    throw std::runtime_error("split: not enough documents");

  std::vector<size_t> order(ds.docs.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  rng::Stream stream = rng::fork(seed, "split");
  rng::shuffle(order, stream);

  Split split;
  split.seed = seed;
  size_t pos = 0;
  for (; pos < static_cast<size_t>(test_size); ++pos) {
    const auto& d = ds.docs[order[pos]];
    split.test.emplace_back(d.id, d.label);
  }
  size_t pool_end = std::min(order.size(), pos + static_cast<size_t>(train_cap));

  std::unordered_map<std::string, int> want;
  for (const std::string& l : ds.labels) want[l] = per_class;
  std::vector<size_t> pool_rest;
  for (; pos < pool_end; ++pos) {
    const auto& d = ds.docs[order[pos]];
    if (want[d.label] > 0) {
      --want[d.label];
      split.labeled.emplace_back(d.id, d.label);
    } else {
      pool_rest.push_back(order[pos]);
    }
  }
  for (const auto& [label, missing] : want)
    if (missing > 0)
      throw std::runtime_error("split: label " + label + " has fewer than " +
                               std::to_string(per_class) + " training documents");
  for (size_t i : pool_rest) split.unlabeled.push_back(ds.docs[i].id);
  return split;
}

struct EmitOptions {
  bool citation_view = false;  // also emit predictC supervised examples
  int tune_size = 0;           // unlabeled docs annotated for budget tuning
  uint64_t seed = 13;
};

struct EmittedFiles {
  std::string facts;
  std::string train_examples;
  std::string train_examples_citation;
  std::string test_examples;
  std::string tune_examples;
};

inline std::string classifier_example_line(const std::string& pred, const std::string& doc,
                                           const std::string& label,
                                           const std::vector<std::string>& labels) {
  std::string line = pred + "(" + doc + ",Y)\t+" + pred + "(" + doc + "," + label + ")";
  for (const std::string& l : labels)
    if (l != label) line += "\t-" + pred + "(" + doc + "," + l + ")";
  return line;
}

// hasFeature/cites/near/pickLabel facts plus supervised example files for the
// text view (and optionally the citation view), one query per document with
// the true label positive and every other label negative.
inline EmittedFiles emit_classifier_facts(const CitationDataset& ds, const Split& split,
                                          const EmitOptions& opts = {}) {
  EmittedFiles out;
  std::vector<std::string> labels;
  for (const std::string& l : ds.labels) labels.push_back(safe_token(l));

  for (const auto& doc : ds.docs)
    for (const std::string& w : doc.words)
      out.facts += "hasFeature\t" + safe_token(doc.id) + "\t" + safe_token(w) + "\n";
  for (const auto& [a, b] : ds.links) {
    std::string sa = safe_token(a), sb = safe_token(b);
    out.facts += "cites\t" + sa + "\t" + sb + "\n";
    out.facts += "near\t" + sa + "\t" + sb + "\n";
    out.facts += "near\t" + sb + "\t" + sa + "\n";
  }
  for (const std::string& l : labels) out.facts += "pickLabel\t" + l + "\n";

  for (const auto& [doc, label] : split.labeled) {
    out.train_examples +=
        classifier_example_line("predictT", safe_token(doc), safe_token(label), labels) + "\n";
    if (opts.citation_view)
      out.train_examples_citation +=
          classifier_example_line("predictC", safe_token(doc), safe_token(label), labels) + "\n";
  }
  for (const auto& [doc, label] : split.test)
    out.test_examples +=
        classifier_example_line("predictT", safe_token(doc), safe_token(label), labels) + "\n";

  if (opts.tune_size > 0) {
    rng::Stream stream = rng::fork(opts.seed, "tune-split");
    size_t n = std::min(static_cast<size_t>(opts.tune_size), split.unlabeled.size());
    std::vector<size_t> picks = rng::sample_without_replacement(split.unlabeled.size(), n, stream);
    for (size_t i : picks) {
      const auto& doc = ds.docs[ds.index.at(split.unlabeled[i])];
      out.tune_examples +=
          classifier_example_line("predictT", safe_token(doc.id), safe_token(doc.label), labels) +
          "\n";
    }
  }
  return out;
}

}  // namespace prowl
