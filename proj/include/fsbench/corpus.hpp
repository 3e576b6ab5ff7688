#pragma once

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "fsbench/time_util.hpp"

namespace fsbench {

struct NewsArticle {
  std::string id;
  Timestamp timestamp;
  std::string ticker;
  std::string headline;
  std::string body;
  std::string source;

  // Headline and body joined the way every prompt and similarity scorer sees them.
  std::string text() const { return body.empty() ? headline : headline + "\n" + body; }
};

struct PriceBar {
  std::string ticker;
  Date date;
  double open = 0.0;
  double close = 0.0;
};

enum class Direction { Up, Down, Flat };

std::string_view to_string(Direction d) noexcept;

struct Rejection {
  std::size_t row_number = 0;  // 1-based data row (header and blank lines not counted)
  std::string reason;
};

enum class NewsFormat { csv, jsonl };

// Accepts "csv" or "jsonl"; anything else is Errc::unknown_format.
NewsFormat parse_news_format(std::string_view name);
// Guess from the file extension (.csv, .jsonl, .ndjson).
NewsFormat news_format_for(const std::filesystem::path& path);

// Canonical field name -> header/key used by the source file. Fields absent
// from the map are read under their canonical names.
using ColumnMap = std::map<std::string, std::string, std::less<>>;

struct NewsLoadOptions {
  ColumnMap columns;
  std::optional<Timestamp> ingested_at;  // defaults to the wall clock
};

struct NewsLoadResult {
  std::vector<NewsArticle> articles;
  std::vector<Rejection> rejections;
};

NewsLoadResult parse_news(std::string_view text, NewsFormat format, const NewsLoadOptions& options = {});
NewsLoadResult load_news(const std::filesystem::path& path, NewsFormat format,
                         const NewsLoadOptions& options = {});

// Exact (ticker, date) lookup over daily bars.
class PriceTable {
 public:
  // Throws Errc::duplicate_key or Errc::invalid_price.
  void insert(PriceBar bar);

  const PriceBar* find(std::string_view ticker, Date date) const;
  // First bar for the ticker strictly after `date`.
  const PriceBar* next_after(std::string_view ticker, Date date) const;

  std::size_t size() const noexcept { return bars_.size(); }
  bool empty() const noexcept { return bars_.empty(); }

  auto begin() const { return bars_.begin(); }
  auto end() const { return bars_.end(); }

 private:
  std::map<std::pair<std::string, Date>, PriceBar> bars_;
};

PriceTable parse_prices(std::string_view text);
PriceTable load_prices(const std::filesystem::path& path);

// Up when close/open - 1 >= threshold, Down when <= -threshold, Flat otherwise.
Direction derive_direction(const PriceBar& bar, double threshold);

struct LabelOptions {
  double threshold = 0.001;
  // Articles stamped at or after market_close (UTC time of day) join the next
  // available bar instead of their own calendar date.
  bool shift_after_close = false;
  std::chrono::seconds market_close = std::chrono::hours{20};
};

struct LabeledArticle {
  NewsArticle article;
  std::optional<Direction> direction;  // nullopt: no matching price bar
  std::optional<Date> price_date;

  bool labeled() const noexcept { return direction.has_value(); }
  bool evaluable() const noexcept { return direction && *direction != Direction::Flat; }
};

std::vector<LabeledArticle> attach_labels(std::span<const NewsArticle> articles, const PriceTable& prices,
                                          const LabelOptions& options = {});

struct LabelCounts {
  std::size_t up = 0;
  std::size_t down = 0;
  std::size_t flat = 0;
  std::size_t unlabeled = 0;

  std::size_t total() const noexcept { return up + down + flat + unlabeled; }
  std::size_t evaluable() const noexcept { return up + down; }
};

LabelCounts count_labels(std::span<const LabeledArticle> articles);

struct SplitCorpus {
  std::vector<LabeledArticle> dev;   // timestamp < cutoff
  std::vector<LabeledArticle> test;  // timestamp >= cutoff
  Timestamp cutoff;
};

// Ties go to test. Throws Errc::empty_split if either side ends up empty.
SplitCorpus temporal_split(std::span<const LabeledArticle> articles, Timestamp cutoff);

std::vector<LabeledArticle> evaluation_set(std::span<const LabeledArticle> articles);

void to_json(nlohmann::json& j, const NewsArticle& a);
void to_json(nlohmann::json& j, const Rejection& r);

std::string to_jsonl(std::span<const Rejection> rejections);

}  // namespace fsbench
