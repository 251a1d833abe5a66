#include "isobench/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <json.hpp>
#include <random>
#include <sstream>

#include "isobench/digest.hpp"
#include "isobench/error.hpp"
#include "isobench/text.hpp"

namespace isobench {

using json = nlohmann::ordered_json;

SamplingParams SamplingParams::defaults_for(int k) {
  SamplingParams p;
  p.k = k;
  p.temperature = k > 1 ? 0.5 : 0.0;
  return p;
}

void SamplingParams::validate() const {
  if (k < 1) throw Error(ErrorCode::ConfigError, "k must be >= 1");
  if (temperature < 0) throw Error(ErrorCode::ConfigError, "temperature must be >= 0");
  if (!(top_p > 0 && top_p <= 1)) throw Error(ErrorCode::ConfigError, "top_p must be in (0, 1]");
  if (max_generation_units < 1) throw Error(ErrorCode::ConfigError, "max generation units must be >= 1");
}

// ---------------------------------------------------------------------------

DemoSelection select_demonstrations(const std::map<Category, std::vector<std::string>>& pools, std::uint64_t seed,
                                    int per_category) {
  DemoSelection out;
  std::mt19937_64 rng(seed);
  for (Category cat : kBenchCategories) {
    auto it = pools.find(cat);
    if (it == pools.end()) continue;
    const std::vector<std::string>& pool = it->second;
    const std::size_t want = static_cast<std::size_t>(std::max(per_category, 0));
    if (pool.size() <= want)
      out.warnings.push_back(std::string(to_string(cat)) + ": only " + std::to_string(pool.size()) +
                             " lemmas for " + std::to_string(want) + " demonstrations");
    const std::size_t m = std::min(want, pool.size());
    std::vector<std::string> shuffled = pool;
    for (std::size_t i = 0; i < m; ++i) {
      std::size_t j = i + static_cast<std::size_t>(rng() % (shuffled.size() - i));
      std::swap(shuffled[i], shuffled[j]);
    }
    std::vector<std::string> demos(shuffled.begin(), shuffled.begin() + static_cast<std::ptrdiff_t>(m));
    std::set<std::string> chosen(demos.begin(), demos.end());
    auto& rest = out.evaluation[cat];
    for (const auto& id : pool)
      if (!chosen.count(id)) rest.push_back(id);
    out.demos[cat] = std::move(demos);
  }
  return out;
}

// ---------------------------------------------------------------------------

void Augmentations::validate() const {
  if (fixing && try_again)
    throw Error(ErrorCode::ConfigError, "fixing and try_again are mutually exclusive (try_again is fixing without the error message)");
}

std::string Augmentations::describe() const {
  std::vector<std::string> on;
  if (similar) on.push_back("similar");
  if (dependency) on.push_back(force_dependency_for_d ? "dependency(+D)" : "dependency");
  if (fixing) on.push_back("fixing");
  if (try_again) on.push_back("try_again");
  return on.empty() ? "none" : join(on, ",");
}

std::string base_instruction() {
  return "You are an experienced formal language programmer. \n"
         "You not only know the Isabelle formal language very well, but also are very familiar with the seL4 project.\n"
         "As a reminder, seL4 is an almost fully formally verified operating system microkernel.\n"
         "Your mission is to write formal proofs in Isabelle for the given specifications, which formally describe "
         "properties of seL4 in Isabelle.\n"
         "You are not supposed to write anything other than formal proofs in Isabelle.\n"
         "E.g., You should not write comments or explanations in natural language.\n"
         "In addition, the formal proofs you write will be automatically checked,\n"
         "therefore, you need to do your best to make it correct.";
}

std::string similar_instruction() {
  return "Some chunks of seL4 with similar specifications are provided before the target specification.\n"
         "Each chunk is provided between the tags of \"<sim>\" and \"</sim>\".\n"
         "You can use these chunks to assist the proof of the target specification.";
}

std::string dependency_instruction() {
  return "Some previous chunks of seL4 are provided before the target specification as plausible dependencies.\n"
         "Each chunk is provided between the tags of \"<dep>\" and \"</dep>\".\n"
         "You can use these chunks to assist the proof of the target specification.";
}

std::string fixing_instruction() {
  return "If the previous proof is not correct,\n"
         "the error message may be provided inside curly brackets {just like this}.\n"
         "If the error message is provided, you are supposed to make the previous proof correct at your best.";
}

std::string build_instruction(const Augmentations& aug) {
  std::string out = base_instruction();
  if (aug.similar) out += "\n\n" + similar_instruction();
  if (aug.dependency) out += "\n\n" + dependency_instruction();
  if (aug.second_round()) out += "\n\n" + fixing_instruction();
  return out;
}

std::string fixing_message(std::string_view error) { return "{" + std::string(error) + "}"; }

std::string user_content(std::string_view augmentation, std::string_view spec) {
  if (augmentation.empty()) return std::string(spec);
  return std::string(augmentation) + "\n" + std::string(spec);
}

std::vector<Message> assemble_prompt(const std::string& instruction, const std::vector<Demonstration>& demos,
                                     std::string_view target_augmentation, std::string_view target_spec,
                                     bool include_fixing_rounds, bool try_again) {
  std::vector<Message> out{{"system", instruction}};
  for (const auto& d : demos) {
    out.push_back({"user", user_content(d.augmentation, d.spec)});
    if (include_fixing_rounds && d.wrong_proof && d.error) {
      out.push_back({"assistant", *d.wrong_proof});
      out.push_back({"user", try_again ? std::string(kTryAgainMessage) : fixing_message(*d.error)});
    }
    out.push_back({"assistant", d.proof});
  }
  out.push_back({"user", user_content(target_augmentation, target_spec)});
  return out;
}

std::string prompt_digest(const std::vector<Message>& messages) {
  json j = json::array();
  for (const auto& m : messages) j.push_back({{"role", m.role}, {"content", m.content}});
  return sha256_hex(j.dump());
}

// ---------------------------------------------------------------------------

std::string Precheck::primary() const {
  if (refused_or_empty) return "refused_or_empty";
  if (banned_token) return "banned_token";
  if (too_long) return "too_long";
  return "ok";
}

std::string Precheck::message() const {
  if (refused_or_empty) return "Refused or empty generation";
  if (banned_token) return "Generation contains sorry/oops";
  if (too_long) return "Generation exceeds " + std::to_string(units) + " units limit";
  return "";
}

std::vector<std::string> default_refusal_patterns() {
  return {"I cannot assist", "I can't assist", "I can not assist", "I cannot help", "I can't help",
          "I'm unable to",   "I am unable to",  "I'm sorry, but",   "I am sorry, but", "As an AI"};
}

std::vector<std::string> load_refusal_patterns(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open refusal patterns " + path);
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    auto p = trim(line);
    if (!p.empty()) out.emplace_back(p);
  }
  return out;
}

int whitespace_units(std::string_view text) {
  int n = 0;
  bool in = false;
  for (char c : text) {
    bool ws = std::isspace(static_cast<unsigned char>(c)) != 0;
    if (!ws && !in) ++n;
    in = !ws;
  }
  return n;
}

namespace {

std::string strip_comments(std::string_view text) {
  std::string out;
  int depth = 0;
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (text.compare(i, 2, "(*") == 0) {
      ++depth;
      ++i;
      out += ' ';
    } else if (depth > 0 && text.compare(i, 2, "*)") == 0) {
      --depth;
      ++i;
      out += ' ';
    } else if (depth == 0) {
      out += text[i];
    }
  }
  return out;
}

bool word_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '\''; }

}  // namespace

bool has_banned_token(std::string_view text) {
  std::string low = to_lower(strip_comments(text));
  for (std::string_view w : {"sorry", "oops"}) {
    for (std::size_t at = low.find(w); at != std::string::npos; at = low.find(w, at + 1)) {
      bool left = at == 0 || !word_char(low[at - 1]);
      bool right = at + w.size() >= low.size() || !word_char(low[at + w.size()]);
      if (left && right) return true;
    }
  }
  return false;
}

Precheck precheck(std::string_view generation, int max_units, const std::vector<std::string>& refusal_patterns,
                  std::optional<int> reported_units) {
  Precheck p;
  p.units = reported_units.value_or(whitespace_units(generation));
  std::string low = to_lower(generation);
  p.refused_or_empty = is_blank(generation);
  for (const auto& pat : refusal_patterns)
    if (low.find(to_lower(pat)) != std::string::npos) p.refused_or_empty = true;
  p.banned_token = has_banned_token(generation);
  p.too_long = p.units > max_units;
  return p;
}

Precheck precheck(std::string_view generation, int max_units) {
  static const auto patterns = default_refusal_patterns();
  return precheck(generation, max_units, patterns);
}

// ---------------------------------------------------------------------------

const char* to_string(ErrorClass c) noexcept {
  switch (c) {
    case ErrorClass::Undefined: return "undefined";
    case ErrorClass::Logic: return "logic";
    case ErrorClass::Other: return "other";
  }
  return "other";
}

ErrorClass parse_error_class(std::string_view s) {
  if (s == "undefined") return ErrorClass::Undefined;
  if (s == "logic") return ErrorClass::Logic;
  if (s == "other") return ErrorClass::Other;
  throw Error(ErrorCode::IoError, "unknown error class " + std::string(s));
}

const char* to_string(Round r) noexcept { return r == Round::First ? "first" : "fixing"; }

std::string TrialRecord::error_text() const {
  if (!endpoint_error.empty()) return endpoint_error;
  if (!precheck.ok()) return precheck.message();
  if (verify) return verify->status == VerifyStatus::Timeout && verify->message.empty() ? "Timeout" : verify->message;
  return "";
}

Classification classify_message(std::string_view message) {
  static const char* kUndefined[] = {"Undefined fact",    "Undefined method",  "Undefined constant",
                                     "Unknown constant",  "Undefined type",    "Undefined locale",
                                     "Undefined attribute", "Unknown fact",    "Undefined theory"};
  static const char* kLogic[] = {"Failed to finish proof", "Failed to apply proof method",
                                 "Failed to apply initial proof method", "Failed to apply terminal proof method",
                                 "remaining goal", "Unsolved goals", "empty result sequence"};
  static const char* kOther[] = {"Outer syntax error", "Inner syntax error", "Malformed", "Timeout", "Bad",
                                 "Refused or empty", "sorry/oops", "exceeds", "Type unification failed"};
  for (const char* p : kUndefined)
    if (message.find(p) != std::string_view::npos) return {ErrorClass::Undefined, false};
  for (const char* p : kLogic)
    if (message.find(p) != std::string_view::npos) return {ErrorClass::Logic, false};
  for (const char* p : kOther)
    if (message.find(p) != std::string_view::npos) return {ErrorClass::Other, false};
  return {ErrorClass::Other, true};
}

Classification classify_error(const TrialRecord& r) {
  if (!r.endpoint_error.empty()) return {ErrorClass::Other, false};
  if (!r.precheck.ok()) return {ErrorClass::Other, false};
  if (!r.verify) return {ErrorClass::Other, true};
  if (r.verify->status == VerifyStatus::Timeout) return {ErrorClass::Other, false};
  return classify_message(r.verify->message);
}

void finalize_record(TrialRecord& r) {
  if (r.success()) {
    r.error_class.reset();
    r.unmatched = false;
    return;
  }
  auto c = classify_error(r);
  r.error_class = c.cls;
  r.unmatched = c.unmatched;
}

double round1(double value) { return std::round(value * 10.0) / 10.0; }

std::string format1(double value) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f", round1(value));
  return buf;
}

namespace {

/// Records per lemma that count for ACC#k, in (trial, round) order.
std::map<std::string, std::vector<const TrialRecord*>> counted(const std::vector<TrialRecord>& records, int k) {
  std::map<std::string, std::vector<const TrialRecord*>> out;
  for (const auto& r : records)
    if (r.trial_index < k) out[r.lemma_id].push_back(&r);
  for (auto& [id, rs] : out)
    std::stable_sort(rs.begin(), rs.end(), [](const TrialRecord* a, const TrialRecord* b) {
      return a->trial_index != b->trial_index ? a->trial_index < b->trial_index : a->round < b->round;
    });
  return out;
}

}  // namespace

std::map<Category, AccResult> acc_at_k(const std::vector<TrialRecord>& records,
                                       const std::map<std::string, Category>& lemma_categories, int k) {
  std::map<Category, AccResult> out;
  for (Category c : kBenchCategories) out[c];
  auto by_lemma = counted(records, k);
  for (const auto& [id, cat] : lemma_categories) {
    auto& acc = out[cat];
    ++acc.total;
    auto it = by_lemma.find(id);
    if (it != by_lemma.end() &&
        std::any_of(it->second.begin(), it->second.end(), [](const TrialRecord* r) { return r->success(); }))
      ++acc.passed;
  }
  for (auto& [cat, acc] : out)
    acc.percent = acc.total ? round1(100.0 * acc.passed / acc.total) : 0.0;
  return out;
}

std::vector<int> integer_percentages(const std::vector<int>& counts) {
  long total = 0;
  for (int c : counts) total += c;
  std::vector<int> out(counts.size(), 0);
  if (total == 0) return out;
  std::vector<std::pair<long, std::size_t>> remainders;  // scaled remainder, index
  int assigned = 0;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    long scaled = 100L * counts[i];
    out[i] = static_cast<int>(scaled / total);
    assigned += out[i];
    remainders.emplace_back(scaled % total, i);
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t i = 0; assigned < 100 && i < remainders.size(); ++i, ++assigned) ++out[remainders[i].second];
  return out;
}

std::string count_with_percent(int count, int percent) {
  return std::to_string(count) + "(" + std::to_string(percent) + "%)";
}

std::map<Category, ErrorComposition> error_composition(const std::vector<TrialRecord>& records,
                                                       const std::map<std::string, Category>& lemma_categories,
                                                       int k) {
  std::map<Category, ErrorComposition> out;
  for (Category c : kBenchCategories) {
    auto& e = out[c];
    for (ErrorClass ec : {ErrorClass::Undefined, ErrorClass::Logic, ErrorClass::Other}) e.counts[ec] = 0;
  }
  auto by_lemma = counted(records, k);
  for (const auto& [id, cat] : lemma_categories) {
    auto it = by_lemma.find(id);
    const std::vector<const TrialRecord*> none;
    const auto& rs = it == by_lemma.end() ? none : it->second;
    if (std::any_of(rs.begin(), rs.end(), [](const TrialRecord* r) { return r->success(); })) continue;
    auto& e = out[cat];
    ++e.total;
    if (rs.empty()) {
      ++e.counts[ErrorClass::Other];
      continue;
    }
    const TrialRecord* last = rs.back();
    Classification c{last->error_class.value_or(classify_error(*last).cls), last->unmatched};
    ++e.counts[c.cls];
    e.unmatched += c.unmatched;
  }
  for (auto& [cat, e] : out) {
    auto pct = integer_percentages(
        {e.counts[ErrorClass::Undefined], e.counts[ErrorClass::Logic], e.counts[ErrorClass::Other]});
    e.percents[ErrorClass::Undefined] = pct[0];
    e.percents[ErrorClass::Logic] = pct[1];
    e.percents[ErrorClass::Other] = pct[2];
  }
  return out;
}

RunReport build_report(const std::vector<TrialRecord>& records,
                       const std::map<std::string, Category>& lemma_categories, int k) {
  RunReport r;
  r.k = k;
  for (Category c : kBenchCategories) r.lemma_counts[c] = 0;
  for (const auto& [id, cat] : lemma_categories) ++r.lemma_counts[cat];
  r.acc = acc_at_k(records, lemma_categories, k);
  r.errors = error_composition(records, lemma_categories, k);
  return r;
}

std::string RunReport::to_json() const {
  json j;
  j["k"] = k;
  j["seed"] = seed;
  j["config_digest"] = config_digest;
  j["augmentations"] = augmentations;
  json cats = json::object();
  for (Category c : kBenchCategories) {
    const auto& a = acc.at(c);
    const auto& e = errors.at(c);
    json ej = {{"total", e.total}, {"unmatched", e.unmatched}};
    for (ErrorClass ec : {ErrorClass::Undefined, ErrorClass::Logic, ErrorClass::Other})
      ej[to_string(ec)] = {{"count", e.counts.at(ec)}, {"percent", e.percents.at(ec)}};
    cats[to_string(c)] = {{"lemmas", lemma_counts.at(c)},
                          {"passed", a.passed},
                          {"acc", a.percent},
                          {"errors", ej}};
  }
  j["categories"] = cats;
  j["dependency"] = {{"located", dependency_located}, {"skipped", dependency_skipped}};
  return j.dump(2) + "\n";
}

std::string RunReport::to_text() const {
  std::ostringstream out;
  auto row = [&](const std::string& label, const std::vector<std::string>& cells) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%-10s", label.c_str());
    out << buf;
    for (const auto& c : cells) {
      std::snprintf(buf, sizeof buf, "%-10s", c.c_str());
      out << buf;
    }
    std::string s = out.str();
    while (!s.empty() && s.back() == ' ') s.pop_back();
    out.str(s);
    out.seekp(0, std::ios::end);
    out << "\n";
  };
  out << "seed " << seed << "  config " << config_digest << "  augmentations " << augmentations << "\n\n";
  std::vector<std::string> head, lemmas, accs, totals, und, log, oth, unm;
  for (Category c : kBenchCategories) {
    head.push_back(to_string(c));
    lemmas.push_back(std::to_string(lemma_counts.at(c)));
    accs.push_back(format1(acc.at(c).percent));
    const auto& e = errors.at(c);
    totals.push_back(std::to_string(e.total));
    und.push_back(count_with_percent(e.counts.at(ErrorClass::Undefined), e.percents.at(ErrorClass::Undefined)));
    log.push_back(count_with_percent(e.counts.at(ErrorClass::Logic), e.percents.at(ErrorClass::Logic)));
    oth.push_back(count_with_percent(e.counts.at(ErrorClass::Other), e.percents.at(ErrorClass::Other)));
    unm.push_back(std::to_string(e.unmatched));
  }
  row("", head);
  row("Lemmas", lemmas);
  row("ACC#" + std::to_string(k), accs);
  out << "\n";
  row("Error", head);
  row("Total", totals);
  row("Undefined", und);
  row("Logic", log);
  row("Other", oth);
  row("Unmatched", unm);
  if (dependency_located || dependency_skipped)
    out << "\ndependency facts located " << dependency_located << ", skipped " << dependency_skipped << "\n";
  return out.str();
}

// ---------------------------------------------------------------------------

std::string record_to_json(const TrialRecord& r) {
  json j;
  j["type"] = "trial";
  j["lemma_id"] = r.lemma_id;
  j["category"] = to_string(r.category);
  j["trial_index"] = r.trial_index;
  j["round"] = to_string(r.round);
  j["sampling"] = {{"temperature", r.sampling.temperature},
                   {"top_p", r.sampling.top_p},
                   {"max_generation_units", r.sampling.max_generation_units},
                   {"k", r.sampling.k}};
  j["prompt_digest"] = r.prompt_digest;
  j["generation"] = r.generation;
  j["precheck"] = {{"ok", r.precheck.ok()},
                   {"refused_or_empty", r.precheck.refused_or_empty},
                   {"too_long", r.precheck.too_long},
                   {"banned_token", r.precheck.banned_token},
                   {"units", r.precheck.units}};
  if (r.verify)
    j["verify"] = {{"status", to_string(r.verify->status)},
                   {"message", r.verify->message},
                   {"elapsed_seconds", r.verify->elapsed_seconds}};
  else
    j["verify"] = nullptr;
  j["error_class"] = r.error_class ? json(to_string(*r.error_class)) : json(nullptr);
  j["unmatched"] = r.unmatched;
  if (!r.endpoint_error.empty()) j["endpoint_error"] = r.endpoint_error;
  return j.dump();
}

TrialRecord record_from_json(const std::string& line) {
  auto j = json::parse(line);
  TrialRecord r;
  r.lemma_id = j.at("lemma_id");
  r.category = parse_category(j.at("category").get<std::string>());
  r.trial_index = j.at("trial_index");
  r.round = j.at("round") == "fixing" ? Round::Fixing : Round::First;
  const auto& s = j.at("sampling");
  r.sampling.temperature = s.at("temperature");
  r.sampling.top_p = s.at("top_p");
  r.sampling.max_generation_units = s.at("max_generation_units");
  r.sampling.k = s.at("k");
  r.prompt_digest = j.at("prompt_digest");
  r.generation = j.at("generation");
  const auto& p = j.at("precheck");
  r.precheck.refused_or_empty = p.at("refused_or_empty");
  r.precheck.too_long = p.at("too_long");
  r.precheck.banned_token = p.at("banned_token");
  r.precheck.units = p.at("units");
  if (!j.at("verify").is_null()) {
    VerifyResult v;
    v.status = parse_verify_status(j["verify"].at("status"));
    v.message = j["verify"].at("message");
    v.elapsed_seconds = j["verify"].at("elapsed_seconds");
    r.verify = v;
  }
  if (!j.at("error_class").is_null()) r.error_class = parse_error_class(j["error_class"].get<std::string>());
  r.unmatched = j.at("unmatched");
  r.endpoint_error = j.value("endpoint_error", "");
  return r;
}

}  // namespace isobench
