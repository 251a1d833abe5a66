#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "isobench/corpus.hpp"
#include "isobench/prover.hpp"

namespace isobench {

struct SamplingParams {
  double temperature = 0.0;
  double top_p = 0.95;
  int max_generation_units = 2048;
  int k = 1;

  /// temperature 0 for a single trial, 0.5 when sampling several.
  static SamplingParams defaults_for(int k);
  /// Throws ConfigError when a field is out of range.
  void validate() const;
};

struct Message {
  std::string role;  // system | user | assistant
  std::string content;
  friend bool operator==(const Message&, const Message&) = default;
};

// ---------------------------------------------------------------------------
// demonstrations

struct DemoSelection {
  std::map<Category, std::vector<std::string>> demos;       // lemma ids, selection order
  std::map<Category, std::vector<std::string>> evaluation;  // remaining ids, input order
  std::vector<std::string> warnings;
};

/// Per category present in `pools`, `per_category` demonstrations drawn with a
/// seeded partial Fisher-Yates shuffle; the rest form the evaluation set.
DemoSelection select_demonstrations(const std::map<Category, std::vector<std::string>>& pools, std::uint64_t seed,
                                    int per_category = 5);

// ---------------------------------------------------------------------------
// prompts

struct Augmentations {
  bool similar = false;
  bool dependency = false;
  bool fixing = false;
  bool try_again = false;  // second round without the error message
  bool force_dependency_for_d = false;

  /// Throws ConfigError for fixing together with try_again.
  void validate() const;
  bool second_round() const { return fixing || try_again; }
  std::string describe() const;
};

std::string base_instruction();
std::string similar_instruction();
std::string dependency_instruction();
std::string fixing_instruction();
/// Base instruction plus one paragraph per enabled augmentation.
std::string build_instruction(const Augmentations& aug);

/// The fixing follow-up: the prover message inside curly brackets.
std::string fixing_message(std::string_view error);
inline constexpr std::string_view kTryAgainMessage = "Try again.";

/// One demonstration. A fixing demonstration whose bootstrap generation failed
/// carries the wrong proof and its error and expands to four messages.
struct Demonstration {
  std::string lemma_id;
  std::string spec;
  std::string proof;
  std::string augmentation;  // `<sim>`/`<dep>` blocks, may be empty
  std::optional<std::string> wrong_proof;
  std::optional<std::string> error;
};

/// User message body: augmentation blocks, then the specification.
std::string user_content(std::string_view augmentation, std::string_view spec);

/// system, then user/assistant pairs per demonstration, then the target.
/// With `include_fixing_rounds` a failed demonstration's follow-up is its
/// error in curly brackets, or "Try again." when `try_again` is set.
std::vector<Message> assemble_prompt(const std::string& instruction, const std::vector<Demonstration>& demos,
                                     std::string_view target_augmentation, std::string_view target_spec,
                                     bool include_fixing_rounds, bool try_again = false);

/// sha256 over roles and contents.
std::string prompt_digest(const std::vector<Message>& messages);

// ---------------------------------------------------------------------------
// precheck

struct Precheck {
  bool refused_or_empty = false;
  bool banned_token = false;
  bool too_long = false;
  int units = 0;

  bool ok() const { return !refused_or_empty && !banned_token && !too_long; }
  /// Highest-priority failure: refused_or_empty, banned_token, too_long; "ok".
  std::string primary() const;
  /// Short text used as the error of a failed precheck.
  std::string message() const;
};

std::vector<std::string> default_refusal_patterns();
/// One case-insensitive substring per line, `#` comments.
std::vector<std::string> load_refusal_patterns(const std::string& path);

/// Whitespace-delimited tokens.
int whitespace_units(std::string_view text);
/// `sorry`/`oops` as a word outside comments, any case.
bool has_banned_token(std::string_view text);

/// `reported_units` is the endpoint's completion token count when available.
Precheck precheck(std::string_view generation, int max_units, const std::vector<std::string>& refusal_patterns,
                  std::optional<int> reported_units = std::nullopt);
Precheck precheck(std::string_view generation, int max_units = 2048);

// ---------------------------------------------------------------------------
// trials and metrics

enum class ErrorClass { Undefined, Logic, Other };
const char* to_string(ErrorClass c) noexcept;
ErrorClass parse_error_class(std::string_view s);

enum class Round { First, Fixing };
const char* to_string(Round r) noexcept;

struct TrialRecord {
  std::string lemma_id;
  Category category = Category::P1;
  int trial_index = 0;
  Round round = Round::First;
  SamplingParams sampling;
  std::string prompt_digest;
  std::string generation;
  Precheck precheck;
  std::optional<VerifyResult> verify;  // absent when the precheck failed or the endpoint errored
  std::optional<ErrorClass> error_class;
  bool unmatched = false;  // failure message matched no known pattern
  std::string endpoint_error;

  bool success() const { return precheck.ok() && verify && verify->status == VerifyStatus::Success; }
  /// Error text shown in a fixing round.
  std::string error_text() const;
};

struct Classification {
  ErrorClass cls = ErrorClass::Other;
  bool unmatched = false;
};

/// undefined: undefined fact/method/constant; logic: unfinished or failed
/// method application; other: precheck failures, timeouts, syntax and
/// anything unmatched (flagged).
Classification classify_error(const TrialRecord& record);
Classification classify_message(std::string_view message);

/// Fills error_class/unmatched from the precheck and verify outcome.
void finalize_record(TrialRecord& record);

struct AccResult {
  int passed = 0;
  int total = 0;
  double percent = 0.0;  // rounded to one decimal
};

/// Percentage rounded half away from zero to one decimal.
double round1(double value);
std::string format1(double value);

/// Per category: a lemma passes when any of its records with
/// trial_index < k (either round) verified. `lemma_categories` lists every
/// evaluated lemma, including ones with no records.
std::map<Category, AccResult> acc_at_k(const std::vector<TrialRecord>& records,
                                       const std::map<std::string, Category>& lemma_categories, int k);

/// Largest-remainder integer percentages that sum to 100 (all 0 for total 0).
std::vector<int> integer_percentages(const std::vector<int>& counts);
/// "38(47%)"
std::string count_with_percent(int count, int percent);

struct ErrorComposition {
  int total = 0;  // failed lemmas
  std::map<ErrorClass, int> counts;
  std::map<ErrorClass, int> percents;
  int unmatched = 0;
};

/// Each failed lemma counted once, by the class of its last failing record.
std::map<Category, ErrorComposition> error_composition(const std::vector<TrialRecord>& records,
                                                       const std::map<std::string, Category>& lemma_categories,
                                                       int k);

struct RunReport {
  int k = 1;
  std::uint64_t seed = 0;
  std::string config_digest;
  std::string augmentations;
  std::map<Category, int> lemma_counts;
  std::map<Category, AccResult> acc;
  std::map<Category, ErrorComposition> errors;
  int dependency_located = 0;
  int dependency_skipped = 0;

  std::string to_json() const;
  /// Table layout: ACC#k row and error rows with bracketed percentages.
  std::string to_text() const;
};

RunReport build_report(const std::vector<TrialRecord>& records,
                       const std::map<std::string, Category>& lemma_categories, int k);

// JSON line (de)serialisation for the run log.
std::string record_to_json(const TrialRecord& record);
TrialRecord record_from_json(const std::string& line);

}  // namespace isobench
