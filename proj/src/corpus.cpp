#include "fsbench/corpus.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <unordered_set>

#include "fsbench/csv.hpp"
#include "fsbench/digest.hpp"
#include "fsbench/error.hpp"

namespace fsbench {
namespace {

constexpr std::string_view kNewsFields[] = {"id", "timestamp", "ticker", "headline", "body", "source"};

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

std::string source_name(const ColumnMap& columns, std::string_view canonical) {
  if (auto it = columns.find(canonical); it != columns.end()) return it->second;
  return std::string(canonical);
}

struct RawRow {
  std::size_t row_number = 0;
  std::string id, timestamp, ticker, headline, body, source;
};

// Applies the NewsArticle invariants; returns the rejection reason on failure.
std::optional<std::string> validate(const RawRow& raw, Timestamp ingested_at,
                                    std::unordered_set<std::string>& seen_ids, NewsArticle& out) {
  out.id = trim(raw.id);
  if (out.id.empty()) return "empty id";
  try {
    out.timestamp = parse_timestamp(trim(raw.timestamp));
  } catch (const Error& e) {
    return std::string("bad timestamp: ") + e.what();
  }
  if (out.timestamp > ingested_at) return "timestamp is in the future: " + format_timestamp(out.timestamp);
  out.ticker = trim(raw.ticker);
  if (out.ticker.empty()) return "empty ticker";
  out.headline = trim(raw.headline);
  if (out.headline.empty()) return "empty headline";
  out.body = trim(raw.body);
  out.source = trim(raw.source);
  if (!seen_ids.insert(out.id).second) return "duplicate id: " + out.id;
  return std::nullopt;
}

std::vector<RawRow> csv_rows(std::string_view text, const ColumnMap& columns, std::vector<Rejection>& rejections) {
  const auto records = csv::parse(text);
  std::vector<RawRow> rows;
  if (records.empty()) return rows;

  const auto& header = records.front().fields;
  std::map<std::string, std::size_t, std::less<>> index;
  for (std::size_t i = 0; i < header.size(); ++i) index.emplace(trim(header[i]), i);

  std::array<std::optional<std::size_t>, 6> col{};
  for (std::size_t f = 0; f < std::size(kNewsFields); ++f) {
    if (auto it = index.find(source_name(columns, kNewsFields[f])); it != index.end()) col[f] = it->second;
  }
  for (std::size_t f = 0; f < 4; ++f) {
    if (!col[f]) {
      throw Error(Errc::missing_column, "news file lacks required column '" +
                                            source_name(columns, kNewsFields[f]) + "'");
    }
  }

  for (std::size_t r = 1; r < records.size(); ++r) {
    const auto& fields = records[r].fields;
    if (fields.size() != header.size()) {
      rejections.push_back({r, "expected " + std::to_string(header.size()) + " fields, got " +
                                   std::to_string(fields.size())});
      continue;
    }
    auto get = [&](std::size_t f) { return col[f] ? fields[*col[f]] : std::string(); };
    rows.push_back({r, get(0), get(1), get(2), get(3), get(4), get(5)});
  }
  return rows;
}

std::vector<RawRow> jsonl_rows(std::string_view text, const ColumnMap& columns, std::vector<Rejection>& rejections) {
  std::vector<RawRow> rows;
  std::size_t row = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    const std::string line = trim(text.substr(pos, nl - pos));
    pos = nl + 1;
    if (line.empty()) continue;
    ++row;

    const auto j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
      rejections.push_back({row, "line is not a JSON object"});
      continue;
    }
    RawRow raw;
    raw.row_number = row;
    std::string* dest[] = {&raw.id, &raw.timestamp, &raw.ticker, &raw.headline, &raw.body, &raw.source};
    std::optional<std::string> problem;
    for (std::size_t f = 0; f < std::size(kNewsFields); ++f) {
      const auto key = source_name(columns, kNewsFields[f]);
      auto it = j.find(key);
      if (it == j.end() || it->is_null()) continue;
      if (it->is_string()) {
        *dest[f] = it->get<std::string>();
      } else if (f == 0 && it->is_number_integer()) {
        *dest[f] = it->dump();
      } else {
        problem = "field '" + key + "' has the wrong type";
        break;
      }
    }
    if (problem) {
      rejections.push_back({row, *problem});
      continue;
    }
    rows.push_back(std::move(raw));
  }
  return rows;
}

double parse_price(std::string_view field, std::size_t row) {
  const std::string s = trim(field);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty()) {
    throw Error(Errc::parse, "price row " + std::to_string(row) + ": malformed number '" + s + "'");
  }
  return v;
}

}  // namespace

std::string_view to_string(Direction d) noexcept {
  switch (d) {
    case Direction::Up: return "Up";
    case Direction::Down: return "Down";
    case Direction::Flat: return "Flat";
  }
  return "?";
}

NewsFormat parse_news_format(std::string_view name) {
  if (name == "csv") return NewsFormat::csv;
  if (name == "jsonl") return NewsFormat::jsonl;
  throw Error(Errc::unknown_format, "unknown news format '" + std::string(name) + "' (expected csv or jsonl)");
}

NewsFormat news_format_for(const std::filesystem::path& path) {
  const auto ext = path.extension().string();
  if (ext == ".csv") return NewsFormat::csv;
  if (ext == ".jsonl" || ext == ".ndjson") return NewsFormat::jsonl;
  throw Error(Errc::unknown_format, "cannot infer news format from '" + path.string() + "'");
}

NewsLoadResult parse_news(std::string_view text, NewsFormat format, const NewsLoadOptions& options) {
  NewsLoadResult result;
  const auto rows = format == NewsFormat::csv ? csv_rows(text, options.columns, result.rejections)
                                              : jsonl_rows(text, options.columns, result.rejections);
  const Timestamp ingested_at = options.ingested_at.value_or(utc_now());
  std::unordered_set<std::string> seen;
  for (const auto& raw : rows) {
    NewsArticle article;
    if (auto reason = validate(raw, ingested_at, seen, article)) {
      result.rejections.push_back({raw.row_number, std::move(*reason)});
    } else {
      result.articles.push_back(std::move(article));
    }
  }
  std::stable_sort(result.rejections.begin(), result.rejections.end(),
                   [](const Rejection& a, const Rejection& b) { return a.row_number < b.row_number; });
  if (result.articles.empty()) throw Error(Errc::no_valid_rows, "zero valid rows");
  return result;
}

NewsLoadResult load_news(const std::filesystem::path& path, NewsFormat format, const NewsLoadOptions& options) {
  return parse_news(read_file(path), format, options);
}

void PriceTable::insert(PriceBar bar) {
  if (!(bar.open > 0.0) || !(bar.close > 0.0)) {
    throw Error(Errc::invalid_price, "non-positive price for " + bar.ticker + " on " + format_date(bar.date));
  }
  auto key = std::make_pair(bar.ticker, bar.date);
  if (bars_.contains(key)) {
    throw Error(Errc::duplicate_key, "duplicate price bar for " + bar.ticker + " on " + format_date(bar.date));
  }
  bars_.emplace(std::move(key), std::move(bar));
}

const PriceBar* PriceTable::find(std::string_view ticker, Date date) const {
  auto it = bars_.find(std::make_pair(std::string(ticker), date));
  return it == bars_.end() ? nullptr : &it->second;
}

const PriceBar* PriceTable::next_after(std::string_view ticker, Date date) const {
  auto it = bars_.upper_bound(std::make_pair(std::string(ticker), date));
  if (it == bars_.end() || it->first.first != ticker) return nullptr;
  return &it->second;
}

PriceTable parse_prices(std::string_view text) {
  const auto records = csv::parse(text);
  if (records.empty()) throw Error(Errc::missing_column, "price file is empty");
  const auto& header = records.front().fields;
  std::array<std::optional<std::size_t>, 4> col{};
  constexpr std::string_view kCols[] = {"ticker", "date", "open", "close"};
  for (std::size_t i = 0; i < header.size(); ++i) {
    for (std::size_t c = 0; c < 4; ++c) {
      if (trim(header[i]) == kCols[c]) col[c] = i;
    }
  }
  for (std::size_t c = 0; c < 4; ++c) {
    if (!col[c]) throw Error(Errc::missing_column, "price file lacks column '" + std::string(kCols[c]) + "'");
  }

  PriceTable table;
  for (std::size_t r = 1; r < records.size(); ++r) {
    const auto& f = records[r].fields;
    if (f.size() != header.size()) {
      throw Error(Errc::parse, "price row " + std::to_string(r) + ": expected " + std::to_string(header.size()) +
                                   " fields, got " + std::to_string(f.size()));
    }
    PriceBar bar;
    bar.ticker = trim(f[*col[0]]);
    if (bar.ticker.empty()) throw Error(Errc::parse, "price row " + std::to_string(r) + ": empty ticker");
    bar.date = parse_date(trim(f[*col[1]]));
    bar.open = parse_price(f[*col[2]], r);
    bar.close = parse_price(f[*col[3]], r);
    table.insert(std::move(bar));
  }
  return table;
}

PriceTable load_prices(const std::filesystem::path& path) { return parse_prices(read_file(path)); }

Direction derive_direction(const PriceBar& bar, double threshold) {
  const double ret = bar.close / bar.open - 1.0;
  if (ret >= threshold) return Direction::Up;
  if (ret <= -threshold) return Direction::Down;
  return Direction::Flat;
}

std::vector<LabeledArticle> attach_labels(std::span<const NewsArticle> articles, const PriceTable& prices,
                                          const LabelOptions& options) {
  if (options.threshold < 0.0) throw Error(Errc::precondition, "threshold must be non-negative");
  std::vector<LabeledArticle> out;
  out.reserve(articles.size());
  for (const auto& a : articles) {
    LabeledArticle la{a, std::nullopt, std::nullopt};
    const Date day = calendar_date(a.timestamp);
    const PriceBar* bar = nullptr;
    if (options.shift_after_close && a.timestamp - Timestamp{day} >= options.market_close) {
      bar = prices.next_after(a.ticker, day);
    } else {
      bar = prices.find(a.ticker, day);
    }
    if (bar) {
      la.direction = derive_direction(*bar, options.threshold);
      la.price_date = bar->date;
    }
    out.push_back(std::move(la));
  }
  return out;
}

LabelCounts count_labels(std::span<const LabeledArticle> articles) {
  LabelCounts c;
  for (const auto& a : articles) {
    if (!a.direction) {
      ++c.unlabeled;
      continue;
    }
    switch (*a.direction) {
      case Direction::Up: ++c.up; break;
      case Direction::Down: ++c.down; break;
      case Direction::Flat: ++c.flat; break;
    }
  }
  return c;
}

SplitCorpus temporal_split(std::span<const LabeledArticle> articles, Timestamp cutoff) {
  SplitCorpus split{{}, {}, cutoff};
  for (const auto& a : articles) {
    (a.article.timestamp < cutoff ? split.dev : split.test).push_back(a);
  }
  if (split.test.empty()) throw Error(Errc::empty_split, "empty test side: no article at or after the cutoff");
  if (split.dev.empty()) throw Error(Errc::empty_split, "empty dev side: no article before the cutoff");
  return split;
}

std::vector<LabeledArticle> evaluation_set(std::span<const LabeledArticle> articles) {
  std::vector<LabeledArticle> out;
  for (const auto& a : articles) {
    if (a.evaluable()) out.push_back(a);
  }
  return out;
}

void to_json(nlohmann::json& j, const NewsArticle& a) {
  j = nlohmann::json{{"id", a.id},           {"timestamp", format_timestamp(a.timestamp)},
                     {"ticker", a.ticker},   {"headline", a.headline},
                     {"body", a.body},       {"source", a.source}};
}

void to_json(nlohmann::json& j, const Rejection& r) {
  j = nlohmann::json{{"row_number", r.row_number}, {"reason", r.reason}};
}

std::string to_jsonl(std::span<const Rejection> rejections) {
  std::string out;
  for (const auto& r : rejections) out += nlohmann::json(r).dump() + "\n";
  return out;
}

}  // namespace fsbench
