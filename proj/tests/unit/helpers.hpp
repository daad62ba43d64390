#pragma once

#include <filesystem>
#include <string>

#include <gtest/gtest.h>

#include "synenc/common.hpp"
#include "synenc/treebank.hpp"

#define EXPECT_ERROR(stmt, errcode)                                                 \
  do {                                                                              \
    try {                                                                           \
      stmt;                                                                         \
      ADD_FAILURE() << "expected " #errcode;                                        \
    } catch (const synenc::Error& e__) {                                            \
      EXPECT_EQ(synenc::to_string(e__.code()), synenc::to_string(synenc::ErrorCode::errcode)) << e__.what(); \
    }                                                                               \
  } while (0)

namespace testing_util {

inline constexpr const char* kBeganTree = "(S (NP (PRP I)) (VP (VBD began)))";

inline std::string conllu_line(int id, const std::string& form, const std::string& upos, const std::string& xpos,
                               int head, const std::string& rel) {
  return std::to_string(id) + "\t" + form + "\t" + form + "\t" + upos + "\t" + xpos + "\t_\t" +
         std::to_string(head) + "\t" + rel + "\t_\t_\n";
}

// Fresh empty directory under the system temp dir.
inline std::string temp_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("synenc-test-" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir.string();
}

// Two sentences: "I began ." and "the story ended , slowly ."
struct Fixture {
  std::string trees;
  std::string conllu;
  std::string timing;
  std::string frequency;
};

inline Fixture two_sentences() {
  Fixture f;
  f.trees =
      "(S (NP (PRP I)) (VP (VBD began)) (. .))\n"
      "(S (NP (DT the) (NN story)) (VP (VBD ended) (, ,) (ADVP (RB slowly))) (. .))\n";
  f.conllu = "# sent 1\n" + conllu_line(1, "I", "PRON", "PRP", 2, "nsubj") +
             conllu_line(2, "began", "VERB", "VBD", 0, "root") + conllu_line(3, ".", "PUNCT", ".", 2, "punct") +
             "\n" + conllu_line(1, "the", "DET", "DT", 2, "det") + conllu_line(2, "story", "NOUN", "NN", 3, "nsubj") +
             conllu_line(3, "ended", "VERB", "VBD", 0, "root") + conllu_line(4, ",", "PUNCT", ",", 3, "punct") +
             conllu_line(5, "slowly", "ADV", "RB", 3, "advmod") + conllu_line(6, ".", "PUNCT", ".", 3, "punct") + "\n";
  f.timing =
      "word\tonset_sec\toffset_sec\tsentence_id\ttoken_id\n"
      "I\t0.5\t0.7\t0\t0\n"
      "began\t0.8\t1.2\t0\t1\n"
      ".\t1.2\t1.2\t0\t2\n"
      "the\t2.0\t2.1\t1\t0\n"
      "story\t2.2\t2.6\t1\t1\n"
      "ended\t2.7\t3.1\t1\t2\n"
      ",\t3.1\t3.1\t1\t3\n"
      "slowly\t3.3\t3.9\t1\t4\n"
      ".\t3.9\t3.9\t1\t5\n";
  f.frequency = "word\tper_billion\ni\t5000000\nbegan\t20000\nthe\t60000000\nstory\t90000\nended\t30000\nslowly\t1000\n";
  return f;
}

inline synenc::treebank::StimulusCorpus fixture_corpus(bool with_timing = true) {
  const auto f = two_sentences();
  auto c = synenc::treebank::StimulusCorpus::build(synenc::treebank::parse_tree_file(f.trees),
                                                   synenc::treebank::parse_conllu(f.conllu));
  return with_timing ? c.with_timing(f.timing) : c;
}

}  // namespace testing_util
