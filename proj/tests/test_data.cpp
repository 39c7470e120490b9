#include <fstream>

#include <gtest/gtest.h>

#include "support.hpp"
#include "tsalign/data.hpp"

using namespace tsalign;
using namespace tsalign::data;

namespace {

std::filesystem::path write_file(const std::filesystem::path& dir, const std::string& name,
                                 const std::string& text) {
  const auto p = dir / name;
  std::ofstream(p) << text;
  return p;
}

RawDataset ramp(int rows, int channels = 1) {
  RawDataset ds;
  ds.name = "ramp";
  ds.values.resize(rows, channels);
  for (int t = 0; t < rows; ++t) {
    for (int c = 0; c < channels; ++c) ds.values(t, c) = t + 100.0 * c;
    ds.timestamps.push_back(std::to_string(t));
    ds.epoch_seconds.push_back(t);
  }
  return ds;
}

}  // namespace

TEST(LoadCsv, FourRowsTwoChannels) {
  const auto dir = fixtures::temp_dir("csv4");
  const auto p = write_file(dir, "a.csv",
                            "date,a,b\n2016-07-01 00:00:00,1,2\n2016-07-01 01:00:00,3,4\n"
                            "2016-07-01 02:00:00,5,6\n2016-07-01 03:00:00,7,8\n");
  const RawDataset ds = load_csv(p);
  EXPECT_EQ(ds.channels(), 2);
  EXPECT_EQ(ds.length(), 4);
  EXPECT_EQ(ds.values(3, 1), 8.0);
  EXPECT_EQ(ds.channel_names, (std::vector<std::string>{"a", "b"}));
}

TEST(LoadCsv, BlankCellCitesRow) {
  const auto dir = fixtures::temp_dir("csvblank");
  const auto p = write_file(dir, "a.csv",
                            "date,a,b\n2016-07-01,1,2\n2016-07-02,3,4\n2016-07-03,,6\n2016-07-04,7,8\n");
  try {
    load_csv(p);
    FAIL() << "expected an error";
  } catch (const ValidationError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("row 3"), std::string::npos) << msg;
    EXPECT_NE(msg.find("'a'"), std::string::npos) << msg;
  }
}

TEST(LoadCsv, EttHeaderGivesSevenChannels) {
  const auto dir = fixtures::temp_dir("csvett");
  const auto p = write_file(dir, "ETTh1.csv",
                            "date,HUFL,HULL,MUFL,MULL,LUFL,LULL,OT\n"
                            "2016-07-01 00:00:00,5.827,2.009,1.599,0.462,4.203,1.340,30.531\n"
                            "2016-07-01 01:00:00,5.693,2.076,1.492,0.426,4.142,1.371,27.787\n");
  const RawDataset ds = load_csv(p);
  EXPECT_EQ(ds.channels(), 7);
  EXPECT_EQ(ds.channel_names.back(), "OT");
}

TEST(LoadCsv, NonMonotoneTimestampsRejected) {
  const auto dir = fixtures::temp_dir("csvmono");
  const auto p = write_file(dir, "a.csv", "date,a\n2016-07-02,1\n2016-07-01,2\n");
  EXPECT_THROW(load_csv(p), ValidationError);
}

TEST(LoadCsv, NonNumericCellRejected) {
  const auto dir = fixtures::temp_dir("csvnum");
  const auto p = write_file(dir, "a.csv", "date,a\n2016-07-01,1\n2016-07-02,x\n");
  EXPECT_THROW(load_csv(p), ValidationError);
}

TEST(LoadCsv, MissingFile) { EXPECT_THROW(load_csv("/nonexistent/file.csv"), ValidationError); }

TEST(ParseDatetime, Formats) {
  EXPECT_EQ(parse_datetime("1970-01-02").value(), 86400);
  EXPECT_EQ(parse_datetime("1970-01-01 01:00").value(), 3600);
  EXPECT_EQ(parse_datetime("1970-01-01T00:00:05").value(), 5);
  EXPECT_FALSE(parse_datetime("yesterday").has_value());
}

TEST(MakeWindows, CountFormula) {
  EXPECT_EQ(make_windows(ramp(10), 4, 2, 1).size(), 5u);
  EXPECT_EQ(make_windows(ramp(6), 4, 2, 1).size(), 1u);
  EXPECT_EQ(make_windows(ramp(20), 4, 2, 3).size(), 5u);
}

TEST(MakeWindows, InsufficientLength) {
  try {
    make_windows(ramp(5), 4, 2, 1);
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("insufficient length"), std::string::npos);
  }
}

TEST(MakeWindows, TargetFollowsHistory) {
  const auto w = make_windows(ramp(12, 2), 4, 3, 2);
  ASSERT_EQ(w.size(), 3u);
  const auto& last = w.back();
  EXPECT_EQ(last.start_index, 4);
  EXPECT_EQ(last.history.rows(), 2);
  EXPECT_EQ(last.history.cols(), 4);
  EXPECT_EQ(last.target.cols(), 3);
  EXPECT_EQ(last.history(0, 3) + 1.0, last.target(0, 0));
  EXPECT_EQ(last.history(1, 0), 104.0);
}

TEST(SplitDataset, Lengths) {
  const Splits s = split_dataset(ramp(100), SplitSpec{});
  EXPECT_EQ(s.train.length(), 70);
  EXPECT_EQ(s.val.length(), 10);
  EXPECT_EQ(s.test.length(), 20);
  EXPECT_EQ(s.val.values(0, 0), 70.0);
  EXPECT_EQ(s.test.timestamps.front(), "80");

  SplitSpec spec;
  spec.train_fraction = 0.6;
  spec.val_fraction = 0.2;
  spec.test_fraction = 0.2;
  const Splits t = split_dataset(ramp(10), spec);
  EXPECT_EQ(t.train.length(), 6);
  EXPECT_EQ(t.val.length(), 2);
  EXPECT_EQ(t.test.length(), 2);
}

TEST(SplitDataset, FractionsMustSumToOne) {
  SplitSpec spec;
  spec.train_fraction = 0.5;
  spec.val_fraction = 0.5;
  spec.test_fraction = 0.1;
  EXPECT_THROW(split_dataset(ramp(10), spec), ValidationError);
}

TEST(SplitDataset, ShortSegmentWarns) {
  const Splits s = split_dataset(ramp(100), SplitSpec{}, 15);
  ASSERT_EQ(s.warnings.size(), 1u);
  EXPECT_NE(s.warnings[0].find(":val"), std::string::npos);
}

TEST(SubsampleFewshot, PrefixCeil) {
  std::vector<WindowPair> w(100);
  for (int i = 0; i < 100; ++i) w[static_cast<std::size_t>(i)].start_index = i;
  auto ten = subsample_fewshot(w, 0.1);
  ASSERT_EQ(ten.size(), 10u);
  EXPECT_EQ(ten.back().start_index, 9);

  std::vector<WindowPair> seven(7);
  EXPECT_EQ(subsample_fewshot(seven, 1.0).size(), 7u);
  std::vector<WindowPair> three(3);
  EXPECT_EQ(subsample_fewshot(three, 0.5).size(), 2u);
  EXPECT_TRUE(subsample_fewshot({}, 0.5).empty());
}

TEST(Standardize, FitsOnTrainOnly) {
  Splits s = split_dataset(ramp(100), SplitSpec{});
  standardize_splits(s);
  EXPECT_NEAR(s.train.values.col(0).mean(), 0.0, 1e-12);
  EXPECT_GT(s.test.values.col(0).mean(), 1.0);
}

TEST(Descriptor, RelativePathAndCsvRoundTrip) {
  const auto dir = fixtures::temp_dir("desc");
  RawDataset ds = synthetic_dataset(50, 2, 24, 0.1, 4);
  write_csv(ds, dir / "syn.csv");
  write_file(dir, "syn.json", R"({"name": "syn", "path": "syn.csv", "L": 8, "H": 4, "period": 6})");
  const DatasetDescriptor d = load_descriptor(dir / "syn.json");
  EXPECT_EQ(d.L, 8);
  EXPECT_EQ(d.period, 6);
  const RawDataset back = load_csv(d.path);
  EXPECT_EQ(back.length(), 50);
  EXPECT_EQ(back.values, ds.values);
}
