#pragma once

// CoNLL-U ingestion. Only ID, FORM and HEAD are used; labels are dropped.
// Multiword-token ranges (3-4) and empty nodes (5.1) are skipped.

#include <charconv>
#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "transgat/data.hpp"

namespace transgat::conllu {

class ParseError : public InputError {
 public:
  ParseError(std::size_t line, const std::string& msg)
      : InputError("line " + std::to_string(line) + ": " + msg), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

// One document's worth of CoNLL-U text, as found by split_documents.
struct Document {
  std::string id;
  std::string text;
  std::size_t first_line = 1;  // line number of `text`'s first line in the source
};

namespace detail {

inline std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find('\t', start);
    out.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

inline bool parse_uint(std::string_view s, long& out) {
  if (s.empty()) return false;
  const auto* end = s.data() + s.size();
  auto [p, ec] = std::from_chars(s.data(), end, out);
  return ec == std::errc() && p == end && out >= 0;
}

struct PendingWord {
  std::string form;
  long head;
  std::size_t line;
};

}  // namespace detail

// Parses one CoNLL-U document into an essay. Line numbers in errors are
// offset by `first_line - 1`.
inline EssayRecord to_record(std::string_view text, std::string id, std::size_t first_line = 1) {
  EssayRecord rec;
  rec.id = std::move(id);
  std::vector<detail::PendingWord> sentence;

  auto flush = [&]() {
    if (sentence.empty()) return;
    const long offset = static_cast<long>(rec.tokens.size());
    const long len = static_cast<long>(sentence.size());
    for (long k = 0; k < len; ++k) {
      const auto& w = sentence[k];
      if (w.head > len)
        throw ParseError(w.line, "head " + std::to_string(w.head) + " exceeds sentence length " + std::to_string(len));
      rec.tokens.push_back(w.form);
      rec.deps.push_back({w.head == 0 ? -1 : offset + w.head - 1, offset + k});
    }
    rec.sentence_spans.push_back({static_cast<std::size_t>(offset), static_cast<std::size_t>(offset + len)});
    sentence.clear();
  };

  std::size_t lineno = first_line - 1;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view line = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);

    if (line.empty()) {
      flush();
      continue;
    }
    if (line.front() == '#') continue;

    const auto cols = detail::split_tabs(line);
    if (cols.size() != 10)
      throw ParseError(lineno, "expected 10 columns, found " + std::to_string(cols.size()));
    const std::string_view id_col = cols[0];
    if (id_col.find('-') != std::string_view::npos || id_col.find('.') != std::string_view::npos) continue;
    long word_id = 0;
    if (!detail::parse_uint(id_col, word_id) || word_id == 0)
      throw ParseError(lineno, "unparsable token id '" + std::string(id_col) + "'");
    if (word_id != static_cast<long>(sentence.size()) + 1)
      throw ParseError(lineno, "token id " + std::to_string(word_id) + " out of sequence");
    long head = 0;
    if (!detail::parse_uint(cols[6], head))
      throw ParseError(lineno, "unparsable head '" + std::string(cols[6]) + "'");
    if (head == word_id) throw ParseError(lineno, "token is its own head");
    sentence.push_back({std::string(cols[1]), head, lineno});
  }
  flush();
  if (rec.sentence_spans.empty()) throw InputError("no sentences in document '" + rec.id + "'");
  return rec;
}

// Splits a multi-essay file on `# newdoc id = ...` comments. Text before the
// first marker (or a file without markers) becomes a document named
// `default_id`. Documents with no token lines are dropped.
inline std::vector<Document> split_documents(std::string_view text, const std::string& default_id) {
  std::vector<Document> docs;
  Document cur{default_id, {}, 1};
  bool has_tokens = false;

  auto push = [&]() {
    if (has_tokens) docs.push_back(cur);
  };

  std::size_t lineno = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view line = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++lineno;
    std::string_view trimmed = line;
    if (!trimmed.empty() && trimmed.back() == '\r') trimmed.remove_suffix(1);

    constexpr std::string_view kNewdoc = "# newdoc id";
    if (trimmed.substr(0, kNewdoc.size()) == kNewdoc) {
      push();
      auto eq = trimmed.find('=');
      std::string id = eq == std::string_view::npos ? std::string() : std::string(trimmed.substr(eq + 1));
      const auto b = id.find_first_not_of(" \t");
      const auto e = id.find_last_not_of(" \t");
      id = b == std::string::npos ? std::string() : id.substr(b, e - b + 1);
      if (id.empty()) throw ParseError(lineno, "newdoc without an id");
      cur = Document{id, {}, lineno + 1};
      has_tokens = false;
      continue;
    }
    if (!trimmed.empty() && trimmed.front() != '#') has_tokens = true;
    cur.text.append(line);
    cur.text.push_back('\n');
  }
  push();
  return docs;
}

// Parses every document in a CoNLL-U file.
inline std::vector<EssayRecord> to_records(std::string_view text, const std::string& default_id) {
  std::vector<EssayRecord> out;
  for (auto& d : split_documents(text, default_id)) out.push_back(to_record(d.text, d.id, d.first_line));
  if (out.empty()) throw InputError("no sentences");
  return out;
}

}  // namespace transgat::conllu
