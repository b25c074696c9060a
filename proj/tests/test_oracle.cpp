#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "reference.hpp"

using namespace cantids;

namespace cantids {
inline void PrintTo(DetectorKind kind, std::ostream* os) { *os << to_string(kind); }
}  // namespace cantids

namespace {

class Oracle : public ::testing::TestWithParam<DetectorKind> {};

}  // namespace

TEST_P(Oracle, MatchesOfflineReference) {
  const auto kind = GetParam();
  std::size_t verdicts = 0;
  for (std::uint64_t seed = 1; seed <= 200; ++seed) {
    auto c = reference::random_case(seed);
    ASSERT_LE(c.trace.size(), 1000u);
    auto streaming = fixtures::run(kind, c.trace, c.model, c.config);
    auto offline = reference::run(kind, c.trace, c.model, c.config);
    verdicts += offline.size();
    auto diff = reference::compare(streaming, offline);
    ASSERT_TRUE(diff.empty()) << to_string(kind) << " seed " << seed << ": " << diff;
  }
  // the workload has to exercise the detector
  EXPECT_GT(verdicts, 0u);
}

INSTANTIATE_TEST_SUITE_P(AllDetectors, Oracle, ::testing::ValuesIn(kAllDetectors),
                         [](const auto& info) {
                           std::string n(to_string(info.param));
                           std::replace(n.begin(), n.end(), '-', '_');
                           return n;
                         });

TEST(OracleWorkload, CoversEveryVerdictShape) {
  std::size_t unknown = 0, late = 0, grouped = 0, missing = 0, windows = 0;
  for (std::uint64_t seed = 1; seed <= 200; ++seed) {
    auto c = reference::random_case(seed);
    for (auto kind : {DetectorKind::otsuka14, DetectorKind::stabili19, DetectorKind::taylor15}) {
      for (const auto& v : reference::run(kind, c.trace, c.model, c.config)) {
        unknown += v.kind == VerdictKind::unknown_id;
        late += v.late;
        grouped += v.group_tag != 0;
        missing += v.kind == VerdictKind::missing_id;
        windows += v.kind == VerdictKind::per_window;
      }
    }
  }
  EXPECT_GT(unknown, 0u);
  EXPECT_GT(late, 0u);
  EXPECT_GT(grouped, 0u);
  EXPECT_GT(missing, 0u);
  EXPECT_GT(windows, 0u);
}
