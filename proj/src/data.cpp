#include "tsalign/data.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <json.hpp>

namespace tsalign::data {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cur;
  bool quoted = false;
  for (char c : line) {
    if (c == '"') {
      quoted = !quoted;
    } else if (c == ',' && !quoted) {
      cells.push_back(trim(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  cells.push_back(trim(cur));
  return cells;
}

bool parse_int(std::string_view s, int& out) {
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && p == s.data() + s.size();
}

// Days since 1970-01-01 for a proleptic Gregorian date.
std::int64_t days_from_civil(std::int64_t y, unsigned m, unsigned d) {
  y -= m <= 2;
  const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
  const auto yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

}  // namespace

void SplitSpec::validate() const {
  if (!(train_fraction > 0 && val_fraction > 0 && test_fraction > 0)) {
    throw ValidationError("split fractions must be positive");
  }
  const double sum = train_fraction + val_fraction + test_fraction;
  if (std::abs(sum - 1.0) > 1e-9) {
    std::ostringstream os;
    os << "split fractions must sum to 1 (got " << sum << ")";
    throw ValidationError(os.str());
  }
  if (few_shot_ratio && !(*few_shot_ratio > 0.0 && *few_shot_ratio <= 1.0)) {
    throw ValidationError("few_shot_ratio must lie in (0, 1]");
  }
}

std::optional<std::int64_t> parse_datetime(std::string_view text) {
  // YYYY-MM-DD[( |T)HH:MM[:SS]]
  if (text.size() < 10 || text[4] != '-' || text[7] != '-') return std::nullopt;
  int y, mo, d, h = 0, mi = 0, s = 0;
  if (!parse_int(text.substr(0, 4), y) || !parse_int(text.substr(5, 2), mo) ||
      !parse_int(text.substr(8, 2), d)) {
    return std::nullopt;
  }
  if (text.size() > 10) {
    if ((text[10] != ' ' && text[10] != 'T') || text.size() < 16 || text[13] != ':') {
      return std::nullopt;
    }
    if (!parse_int(text.substr(11, 2), h) || !parse_int(text.substr(14, 2), mi)) {
      return std::nullopt;
    }
    if (text.size() > 16) {
      if (text.size() != 19 || text[16] != ':' || !parse_int(text.substr(17, 2), s)) {
        return std::nullopt;
      }
    }
  }
  if (mo < 1 || mo > 12 || d < 1 || d > 31 || h > 23 || mi > 59 || s > 60) return std::nullopt;
  return days_from_civil(y, static_cast<unsigned>(mo), static_cast<unsigned>(d)) * 86400 +
         h * 3600 + mi * 60 + s;
}

RawDataset load_csv(const std::filesystem::path& path, const std::string& name) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open dataset file: " + path.string());

  std::string line;
  if (!std::getline(in, line)) throw ValidationError("empty dataset file: " + path.string());
  RawDataset ds;
  ds.name = name.empty() ? path.stem().string() : name;
  auto header = split_csv_line(line);
  if (header.size() < 2) {
    throw ValidationError(path.string() + ": need a date column and at least one value column");
  }
  ds.channel_names.assign(header.begin() + 1, header.end());
  const std::size_t n = ds.channel_names.size();

  std::vector<double> flat;
  std::size_t row = 0;
  std::size_t file_line = 1;
  auto fail = [&](const std::string& what) {
    std::ostringstream os;
    os << path.string() << ": " << what << " at row " << row << " (line " << file_line << ")";
    throw ValidationError(os.str());
  };
  while (std::getline(in, line)) {
    ++file_line;
    if (trim(line).empty()) continue;
    ++row;
    auto cells = split_csv_line(line);
    if (cells.size() != n + 1) {
      fail("expected " + std::to_string(n + 1) + " cells, found " + std::to_string(cells.size()));
    }
    auto ts = parse_datetime(cells[0]);
    if (!ts) fail("unparseable timestamp '" + cells[0] + "' in column 'date'");
    if (!ds.epoch_seconds.empty() && *ts <= ds.epoch_seconds.back()) {
      fail("timestamp '" + cells[0] + "' is not strictly increasing");
    }
    ds.timestamps.push_back(cells[0]);
    ds.epoch_seconds.push_back(*ts);
    for (std::size_t c = 1; c <= n; ++c) {
      const std::string& cell = cells[c];
      if (cell.empty()) fail("missing value in column '" + header[c] + "'");
      double v = 0.0;
      auto [p, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (ec != std::errc() || p != cell.data() + cell.size() || !std::isfinite(v)) {
        fail("non-numeric value '" + cell + "' in column '" + header[c] + "'");
      }
      flat.push_back(v);
    }
  }
  ds.values = Eigen::Map<Matrix>(flat.data(), static_cast<Eigen::Index>(row),
                                 static_cast<Eigen::Index>(n));
  return ds;
}

std::vector<WindowPair> make_windows(const RawDataset& ds, int L, int H, int stride) {
  if (L < 1 || H < 1 || stride < 1) throw ValidationError("make_windows: L, H, stride must be >= 1");
  const Eigen::Index total = ds.length();
  if (total < L + H) {
    std::ostringstream os;
    os << "insufficient length: dataset '" << ds.name << "' has " << total
       << " rows, need at least L + H = " << (L + H);
    throw ValidationError(os.str());
  }
  const Eigen::Index count = (total - L - H) / stride + 1;
  std::vector<WindowPair> out;
  out.reserve(static_cast<std::size_t>(count));
  for (Eigen::Index w = 0; w < count; ++w) {
    const Eigen::Index start = w * stride;
    WindowPair p;
    p.start_index = start;
    p.history = ds.values.middleRows(start, L).transpose();
    p.target = ds.values.middleRows(start + L, H).transpose();
    out.push_back(std::move(p));
  }
  return out;
}

namespace {

RawDataset segment(const RawDataset& ds, Eigen::Index first, Eigen::Index count,
                   const std::string& suffix) {
  RawDataset s;
  s.name = ds.name + suffix;
  s.channel_names = ds.channel_names;
  s.values = ds.values.middleRows(first, count);
  const auto b = static_cast<std::size_t>(first);
  const auto e = static_cast<std::size_t>(first + count);
  s.timestamps.assign(ds.timestamps.begin() + b, ds.timestamps.begin() + e);
  s.epoch_seconds.assign(ds.epoch_seconds.begin() + b, ds.epoch_seconds.begin() + e);
  return s;
}

}  // namespace

Splits split_dataset(const RawDataset& ds, const SplitSpec& spec, Eigen::Index min_length) {
  spec.validate();
  const Eigen::Index total = ds.length();
  const auto n_train = static_cast<Eigen::Index>(
      std::floor(spec.train_fraction * static_cast<double>(total) + 1e-9));
  const auto n_val = static_cast<Eigen::Index>(
      std::floor(spec.val_fraction * static_cast<double>(total) + 1e-9));
  const Eigen::Index n_test = total - n_train - n_val;

  Splits out;
  out.train = segment(ds, 0, n_train, ":train");
  out.val = segment(ds, n_train, n_val, ":val");
  out.test = segment(ds, n_train + n_val, n_test, ":test");
  for (const RawDataset* s : {&out.train, &out.val, &out.test}) {
    if (s->length() < min_length) {
      std::ostringstream os;
      os << "segment '" << s->name << "' has " << s->length() << " rows (< " << min_length
         << "); it yields zero windows";
      out.warnings.push_back(os.str());
    }
  }
  return out;
}

std::vector<WindowPair> subsample_fewshot(const std::vector<WindowPair>& windows, double ratio) {
  if (!(ratio > 0.0 && ratio <= 1.0)) throw ValidationError("few-shot ratio must lie in (0, 1]");
  const auto n = static_cast<double>(windows.size());
  const auto keep = static_cast<std::size_t>(std::ceil(ratio * n - 1e-9));
  return {windows.begin(), windows.begin() + static_cast<std::ptrdiff_t>(std::min(keep, windows.size()))};
}

void standardize_splits(Splits& splits) {
  const Matrix& tr = splits.train.values;
  if (tr.rows() == 0) return;
  const Eigen::RowVectorXd mean = tr.colwise().mean();
  Eigen::RowVectorXd sd = ((tr.rowwise() - mean).array().square().colwise().sum() /
                           static_cast<double>(tr.rows()))
                              .sqrt();
  for (Eigen::Index c = 0; c < sd.size(); ++c) {
    if (sd(c) == 0.0) sd(c) = 1.0;
  }
  for (RawDataset* s : {&splits.train, &splits.val, &splits.test}) {
    s->values = ((s->values.rowwise() - mean).array().rowwise() / sd.array()).matrix();
  }
}

DatasetDescriptor load_descriptor(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open dataset descriptor: " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
  DatasetDescriptor d;
  try {
    d.name = j.value("name", path.stem().string());
    std::filesystem::path p = j.at("path").get<std::string>();
    d.path = p.is_relative() ? path.parent_path() / p : p;
    d.split.train_fraction = j.value("train", d.split.train_fraction);
    d.split.val_fraction = j.value("val", d.split.val_fraction);
    d.split.test_fraction = j.value("test", d.split.test_fraction);
    if (j.contains("few_shot_ratio") && !j["few_shot_ratio"].is_null()) {
      d.split.few_shot_ratio = j["few_shot_ratio"].get<double>();
    }
    d.L = j.value("L", d.L);
    d.H = j.value("H", d.H);
    d.stride = j.value("stride", d.stride);
    d.period = j.value("period", d.period);
    d.context = j.value("context", std::string{});
    d.standardize = j.value("standardize", false);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
  return d;
}

Splits load_splits(const DatasetDescriptor& desc, int L, int H) {
  RawDataset raw = load_csv(desc.path, desc.name);
  Splits s = split_dataset(raw, desc.split, L + H);
  if (desc.standardize) standardize_splits(s);
  return s;
}

RawDataset synthetic_dataset(int rows, int channels, int period, double noise,
                             std::uint64_t seed, double phase_shift) {
  constexpr double kPi = 3.14159265358979323846;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  RawDataset ds;
  ds.name = "synthetic";
  ds.values.resize(rows, channels);
  for (int c = 0; c < channels; ++c) {
    ds.channel_names.push_back("ch" + std::to_string(c));
  }
  for (int t = 0; t < rows; ++t) {
    for (int c = 0; c < channels; ++c) {
      const double slope = (c % 2 == 0 ? 0.004 : -0.003) * (1.0 + 0.5 * c);
      const double amp = 1.0 / (1.0 + 0.5 * c);
      const double phase = phase_shift + 0.7 * c;
      ds.values(t, c) = slope * t + amp * std::sin(2.0 * kPi * t / period + phase) +
                        noise * gauss(rng);
    }
  }
  const std::int64_t base = 1467331200;  // 2016-07-01 00:00:00
  for (int t = 0; t < rows; ++t) {
    const std::int64_t secs = base + 3600LL * t;
    const std::int64_t days = secs / 86400;
    // civil_from_days
    std::int64_t z = days + 719468;
    const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
    const auto doe = static_cast<unsigned>(z - era * 146097);
    const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    const std::int64_t y0 = static_cast<std::int64_t>(yoe) + era * 400;
    const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const unsigned mp = (5 * doy + 2) / 153;
    const unsigned d = doy - (153 * mp + 2) / 5 + 1;
    const unsigned m = mp < 10 ? mp + 3 : mp - 9;
    const std::int64_t y = y0 + (m <= 2);
    const std::int64_t sod = secs % 86400;
    std::ostringstream os;
    os << std::setfill('0') << std::setw(4) << y << '-' << std::setw(2) << m << '-'
       << std::setw(2) << d << ' ' << std::setw(2) << sod / 3600 << ":00:00";
    ds.timestamps.push_back(os.str());
    ds.epoch_seconds.push_back(secs);
  }
  return ds;
}

void write_csv(const RawDataset& ds, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << "date";
  for (const auto& c : ds.channel_names) out << ',' << c;
  out << '\n';
  out << std::setprecision(17);
  for (Eigen::Index t = 0; t < ds.length(); ++t) {
    out << ds.timestamps[static_cast<std::size_t>(t)];
    for (Eigen::Index c = 0; c < ds.channels(); ++c) out << ',' << ds.values(t, c);
    out << '\n';
  }
}

}  // namespace tsalign::data
