#pragma once
/**
 * @file market_data.hpp
 * @brief Option-quote data model, liquidity filters, moneyness/maturity
 *        bucketing and CSV ingestion/emission.
 *
 * CSV schema: header row mandatory; required columns quote_date, spot,
 * strike, dtm, rate, price; optional bid, ask, volume, open_interest,
 * std_error. Prices in quote currency, rates as decimals per year, '.'
 * decimal separator. Missing liquidity fields default to values that pass
 * every filter so synthetic data flows through the same pipeline.
 */

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "njsde/common.hpp"

namespace njsde::market {

struct OptionQuote {
  std::string quote_date;      // calendar date, passthrough text
  double spot = 0.0;           // > 0
  double strike = 0.0;         // > 0
  double maturity = 0.0;       // year fraction, dtm / 365
  double rate = 0.0;           // continuously compounded, per year
  double price = 0.0;          // observed mid >= 0
  double bid = 0.0;
  double ask = 0.0;
  double volume = 0.0;         // count >= 0
  double open_interest = 0.0;  // count >= 0
  double dtm = 0.0;            // calendar days to expiry (fractional allowed)
  std::optional<double> std_error; // generator MC standard error, if any

  double moneyness() const { return spot / strike; }

  void validate() const {
    if (!(spot > 0.0) || !(strike > 0.0))
      throw BadInput("spot and strike must be positive");
    if (!(maturity > 0.0)) throw BadInput("maturity must be positive");
    if (price < 0.0) throw BadInput("price must be nonnegative");
    if (bid < 0.0 || ask < bid) throw BadInput("need ask >= bid >= 0");
    if (volume < 0.0 || open_interest < 0.0)
      throw BadInput("counts must be nonnegative");
    if (std::abs(maturity - dtm / 365.0) > 1e-9)
      throw BadInput("maturity and dtm disagree");
    double m = moneyness();
    if (!std::isfinite(m) || !(m > 0.0))
      throw BadInput("moneyness must be finite and positive");
  }
};

enum class MoneynessClass { DeepOTM, OTM, ATM, ITM, DeepITM };
enum class MaturityClass { Short, Medium, Long };

inline const char* to_string(MoneynessClass c) {
  switch (c) {
    case MoneynessClass::DeepOTM: return "DeepOTM";
    case MoneynessClass::OTM: return "OTM";
    case MoneynessClass::ATM: return "ATM";
    case MoneynessClass::ITM: return "ITM";
    case MoneynessClass::DeepITM: return "DeepITM";
  }
  return "?";
}

inline const char* to_string(MaturityClass c) {
  switch (c) {
    case MaturityClass::Short: return "Short";
    case MaturityClass::Medium: return "Medium";
    case MaturityClass::Long: return "Long";
  }
  return "?";
}

struct Bucket {
  MoneynessClass moneyness_class;
  MaturityClass maturity_class;

  bool operator==(const Bucket&) const = default;

  std::string label() const {
    return std::string(to_string(moneyness_class)) + "/" +
           to_string(maturity_class);
  }
};

/// Moneyness intervals: DeepOTM (0.8,0.9), OTM [0.9,0.99), ATM [0.99,1.01),
/// ITM [1.01,1.1), DeepITM [1.1,1.5). Maturity: Short 1<=dtm<60,
/// Medium 60<=dtm<180, Long dtm>=180.
inline Bucket classify(const OptionQuote& q) {
  const double m = q.moneyness();
  if (!(m > 0.8) || m >= 1.5)
    throw OutOfRange("moneyness outside (0.8, 1.5)");
  if (q.dtm < 1.0) throw OutOfRange("dtm below 1 day");
  MoneynessClass mc;
  if (m < 0.9)
    mc = MoneynessClass::DeepOTM;
  else if (m < 0.99)
    mc = MoneynessClass::OTM;
  else if (m < 1.01)
    mc = MoneynessClass::ATM;
  else if (m < 1.1)
    mc = MoneynessClass::ITM;
  else
    mc = MoneynessClass::DeepITM;
  MaturityClass tc;
  if (q.dtm < 60.0)
    tc = MaturityClass::Short;
  else if (q.dtm < 180.0)
    tc = MaturityClass::Medium;
  else
    tc = MaturityClass::Long;
  return Bucket{mc, tc};
}

inline std::optional<Bucket> try_classify(const OptionQuote& q) {
  const double m = q.moneyness();
  if (!(m > 0.8) || m >= 1.5 || q.dtm < 1.0) return std::nullopt;
  return classify(q);
}

/// Removes quotes that match any illiquidity predicate: zero volume or open
/// interest; bid below 0.05 with ask above twice the bid; dtm below one
/// day; moneyness outside [0.80, 1.50]; price below the European-call
/// lower bound max(spot - strike*e^{-rate*maturity}, 0). Survivor order is
/// preserved and the pass is idempotent.
inline std::vector<OptionQuote> filter_illiquid(
    const std::vector<OptionQuote>& quotes) {
  std::vector<OptionQuote> out;
  out.reserve(quotes.size());
  for (const auto& q : quotes) {
    if (q.volume == 0.0 || q.open_interest == 0.0) continue;
    if (q.bid < 0.05 && q.ask > 2.0 * q.bid) continue;
    if (q.dtm < 1.0) continue;
    const double m = q.moneyness();
    if (m < 0.80 || m > 1.50) continue;
    const double lower_bound =
        std::max(q.spot - q.strike * std::exp(-q.rate * q.maturity), 0.0);
    if (q.price < lower_bound) continue;
    out.push_back(q);
  }
  return out;
}

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

/// Maps logical column names to the header names used in a file. Unmapped
/// names resolve to themselves.
struct CsvSchema {
  std::map<std::string, std::string> columns;

  std::string resolve(const std::string& logical) const {
    auto it = columns.find(logical);
    return it == columns.end() ? logical : it->second;
  }
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur += ch;
    }
  }
  out.push_back(cur);
  return out;
}

inline double parse_double(const std::string& s, std::size_t row,
                           const std::string& col) {
  try {
    std::size_t pos = 0;
    double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw ParseError("cannot parse '" + s + "' in column " + col, row);
  }
}

/// Shortest-width formatting that round-trips doubles exactly.
inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  double back = std::strtod(buf, nullptr);
  if (back == v) {
    for (int prec = 1; prec <= 16; ++prec) {
      char s[40];
      std::snprintf(s, sizeof(s), "%.*g", prec, v);
      if (std::strtod(s, nullptr) == v) return s;
    }
  }
  return buf;
}

} // namespace detail

inline std::vector<OptionQuote> read_quotes(const std::string& path,
                                            const CsvSchema& schema = {}) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw ParseError("empty file", 0);
  const auto header = detail::split_csv_line(line);
  auto find_col = [&](const std::string& logical) -> int {
    const std::string name = schema.resolve(logical);
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return static_cast<int>(i);
    return -1;
  };
  const char* required[] = {"quote_date", "spot", "strike", "dtm", "rate", "price"};
  std::map<std::string, int> col;
  for (const char* name : required) {
    int idx = find_col(name);
    if (idx < 0) throw MissingColumn("missing required column " + schema.resolve(name));
    col[name] = idx;
  }
  const int c_bid = find_col("bid");
  const int c_ask = find_col("ask");
  const int c_volume = find_col("volume");
  const int c_oi = find_col("open_interest");
  const int c_se = find_col("std_error");

  std::vector<OptionQuote> quotes;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty() || line == "\r") continue;
    const auto f = detail::split_csv_line(line);
    if (f.size() < header.size())
      throw ParseError("expected " + std::to_string(header.size()) + " fields", row);
    OptionQuote q;
    q.quote_date = f[static_cast<std::size_t>(col["quote_date"])];
    q.spot = detail::parse_double(f[static_cast<std::size_t>(col["spot"])], row, "spot");
    q.strike = detail::parse_double(f[static_cast<std::size_t>(col["strike"])], row, "strike");
    q.dtm = detail::parse_double(f[static_cast<std::size_t>(col["dtm"])], row, "dtm");
    q.rate = detail::parse_double(f[static_cast<std::size_t>(col["rate"])], row, "rate");
    q.price = detail::parse_double(f[static_cast<std::size_t>(col["price"])], row, "price");
    q.maturity = q.dtm / 365.0;
    auto opt_field = [&](int idx, double fallback) {
      if (idx < 0 || f[static_cast<std::size_t>(idx)].empty()) return fallback;
      return detail::parse_double(f[static_cast<std::size_t>(idx)], row, header[static_cast<std::size_t>(idx)]);
    };
    q.bid = opt_field(c_bid, q.price);
    q.ask = opt_field(c_ask, q.price);
    q.volume = opt_field(c_volume, 1.0);
    q.open_interest = opt_field(c_oi, 1.0);
    if (c_se >= 0 && !f[static_cast<std::size_t>(c_se)].empty())
      q.std_error = detail::parse_double(f[static_cast<std::size_t>(c_se)], row, "std_error");
    quotes.push_back(std::move(q));
  }
  return quotes;
}

inline void write_quotes(const std::string& path,
                         const std::vector<OptionQuote>& quotes) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path + " for writing");
  bool any_se = false;
  for (const auto& q : quotes) any_se |= q.std_error.has_value();
  out << "quote_date,spot,strike,dtm,rate,price,bid,ask,volume,open_interest";
  if (any_se) out << ",std_error";
  out << "\n";
  using detail::format_double;
  for (const auto& q : quotes) {
    out << q.quote_date << ',' << format_double(q.spot) << ','
        << format_double(q.strike) << ',' << format_double(q.dtm) << ','
        << format_double(q.rate) << ',' << format_double(q.price) << ','
        << format_double(q.bid) << ',' << format_double(q.ask) << ','
        << format_double(q.volume) << ',' << format_double(q.open_interest);
    if (any_se)
      out << ',' << (q.std_error ? format_double(*q.std_error) : std::string());
    out << "\n";
  }
  if (!out) throw IoError("write failed for " + path);
}

} // namespace njsde::market
