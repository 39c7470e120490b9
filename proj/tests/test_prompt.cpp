#include <gtest/gtest.h>

#include "support.hpp"
#include "tsalign/prompt.hpp"

using namespace tsalign;
using namespace tsalign::prompt;
using alignment::Component;

TEST(RenderPrompt, InstructionSlots) {
  PromptTemplate t;
  t.dataset_context = "ETTh1 electricity transformer temperature";
  const std::string s = render_prompt(t, Component::trend, summarize(Series{1, 2, 3}), 512, 96);
  EXPECT_NE(s.find("forecast the next 96 steps given the previous 512 steps"), std::string::npos) << s;
  EXPECT_NE(s.find("[trend]"), std::string::npos) << s;
  EXPECT_EQ(s.rfind("ETTh1", 0), 0u);
}

TEST(RenderPrompt, BothFlagsOffAndNoContextIsEmpty) {
  PromptTemplate t;
  t.include_stats = false;
  t.include_instruction = false;
  EXPECT_EQ(render_prompt(t, Component::seasonal, summarize(Series{1, 2}), 8, 4), "");
}

TEST(RenderPrompt, StatisticsLine) {
  PromptTemplate t;
  t.include_instruction = false;
  const std::string s = render_prompt(t, Component::residual, summarize(Series{1, 2, 3}), 3, 1);
  EXPECT_EQ(s, "statistics residual min=1 max=3 mean=2 direction=up");
}

TEST(RenderPrompt, AblationFlagsDropOnlyTheirPart) {
  PromptTemplate t;
  const WindowStats st = summarize(Series{3, 2, 1});
  EXPECT_EQ(st.direction, "down");
  t.include_instruction = false;
  EXPECT_EQ(render_prompt(t, Component::trend, st, 3, 1).find("forecast"), std::string::npos);
  t.include_instruction = true;
  t.include_stats = false;
  const std::string s = render_prompt(t, Component::trend, st, 3, 1);
  EXPECT_EQ(s.find("statistics"), std::string::npos);
  EXPECT_NE(s.find("forecast the next 1 steps"), std::string::npos);
}

TEST(Summarize, DirectionWords) {
  EXPECT_EQ(summarize(Series{2, 2, 2}).direction, "flat");
  EXPECT_EQ(summarize(Series{0, 5, 1}).direction, "up");
  EXPECT_EQ(summarize(Series{}).direction, "flat");
}

TEST(EmbedPrompt, EmptyTextHasNoRows) {
  const auto bb = fixtures::tiny_backbone();
  const PromptEmbedding p = embed_prompt("", *bb);
  EXPECT_EQ(p.length(), 0);
  EXPECT_EQ(p.embedded.rows(), 0);
  EXPECT_EQ(p.embedded.cols(), 16);
}

TEST(EmbedPrompt, DeterministicRowsFromVocabulary) {
  const auto bb = fixtures::tiny_backbone();
  const PromptEmbedding a = embed_prompt("forecast the next 8 steps", *bb);
  const PromptEmbedding b = embed_prompt("forecast the next 8 steps", *bb);
  EXPECT_EQ(a.tokens, b.tokens);
  ASSERT_EQ(a.length(), 5);
  for (int i = 0; i < a.length(); ++i) {
    EXPECT_EQ(a.embedded.row(i), bb->vocab_table().row(a.tokens[static_cast<std::size_t>(i)]));
  }
}

TEST(EmbedPrompt, LeftTruncationKeepsSuffix) {
  const auto bb = fixtures::tiny_backbone();
  std::string text;
  for (int i = 0; i < 80; ++i) text += "w" + std::to_string(i) + " ";
  const auto full = bb->tokenizer().encode(text);
  ASSERT_EQ(full.size(), 80u);
  const PromptEmbedding p = embed_prompt(text, *bb, 64);
  ASSERT_EQ(p.length(), 64);
  EXPECT_EQ(p.tokens, std::vector<int>(full.end() - 64, full.end()));
}

TEST(PrefixConcat, EmptyPromptIsIdentity) {
  const Matrix patches = fixtures::random_matrix(3, 16, 1);
  EXPECT_EQ(prefix_concat(PromptEmbedding{{}, Matrix(0, 16)}, patches), patches);
}

TEST(PrefixConcat, PromptRowsFirst) {
  const auto bb = fixtures::tiny_backbone();
  const PromptEmbedding p = embed_prompt("two words", *bb);
  const Matrix patches = fixtures::random_matrix(3, 16, 1);
  const Matrix out = prefix_concat(p, patches);
  ASSERT_EQ(out.rows(), 5);
  EXPECT_EQ(out.topRows(2), p.embedded);
  EXPECT_EQ(out.bottomRows(3), patches);
  EXPECT_THROW(prefix_concat(p, fixtures::random_matrix(3, 8, 1)), ValidationError);
}

TEST(PrefixConcat, RowCountLaw) {
  const auto bb = fixtures::tiny_backbone();
  for (int words = 0; words < 6; ++words) {
    std::string text;
    for (int i = 0; i < words; ++i) text += "x ";
    const PromptEmbedding p = embed_prompt(text, *bb);
    for (int k = 1; k < 5; ++k) {
      const Matrix patches = fixtures::random_matrix(k, 16, static_cast<std::uint64_t>(k));
      const Matrix out = prefix_concat(p, patches);
      EXPECT_EQ(out.rows(), words + k);
      EXPECT_EQ(out.bottomRows(k), patches);
    }
  }
}
