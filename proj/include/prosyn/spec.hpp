#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "prosyn/model.hpp"

namespace prosyn {

/// Deterministic finite automaton over a finite letter alphabet. The
/// transition function is total: every (location, letter) pair has a
/// successor.
class Dfa {
 public:
  Dfa(std::vector<std::string> locations, int initial,
      std::vector<std::string> alphabet, std::vector<int> accepting,
      std::vector<std::vector<int>> trans)
      : locations_(std::move(locations)),
        initial_(initial),
        alphabet_(std::move(alphabet)),
        accepting_(std::move(accepting)),
        trans_(std::move(trans)) {
    validate();
  }

  int n_locations() const { return int(locations_.size()); }
  int n_letters() const { return int(alphabet_.size()); }
  int initial() const { return initial_; }
  const std::vector<std::string>& locations() const { return locations_; }
  const std::vector<std::string>& alphabet() const { return alphabet_; }
  const std::vector<int>& accepting() const { return accepting_; }

  bool is_accepting(int loc) const {
    return std::find(accepting_.begin(), accepting_.end(), loc) != accepting_.end();
  }

  int letter_index(const std::string& letter) const {
    for (std::size_t i = 0; i < alphabet_.size(); ++i)
      if (alphabet_[i] == letter) return int(i);
    throw std::invalid_argument("dfa: unknown letter '" + letter + "'");
  }

  int step(int loc, int letter_idx) const { return trans_[loc][letter_idx]; }

  struct RunResult {
    int final_location;
    std::vector<bool> accepted_by_prefix;  ///< flag after consuming k+1 letters
  };

  /// Run the automaton on a finite word; accepted_by_prefix[k] reports
  /// whether the run sits in an accepting location after k+1 letters.
  RunResult run(const std::vector<std::string>& word) const {
    RunResult r{initial_, {}};
    r.accepted_by_prefix.reserve(word.size());
    for (const auto& letter : word) {
      r.final_location = step(r.final_location, letter_index(letter));
      r.accepted_by_prefix.push_back(is_accepting(r.final_location));
    }
    return r;
  }

  /// Word accepted by some prefix of length <= max_letters. Co-safe reading:
  /// once an accepting location is visited the word is accepted.
  bool accepts_within(const std::vector<std::string>& word,
                      std::size_t max_letters) const {
    int loc = initial_;
    const std::size_t limit = std::min(max_letters, word.size());
    for (std::size_t k = 0; k < limit; ++k) {
      loc = step(loc, letter_index(word[k]));
      if (is_accepting(loc)) return true;
    }
    return false;
  }

  /// Copy with accepting locations made absorbing, so acceptance is
  /// permanent. Used to canonicalize user automata to prefix semantics.
  Dfa sticky_accepting() const {
    auto trans = trans_;
    for (int acc : accepting_)
      for (int a = 0; a < n_letters(); ++a) trans[acc][a] = acc;
    return Dfa(locations_, initial_, alphabet_, accepting_, std::move(trans));
  }

  /// Copy with the accepting set complemented.
  Dfa complemented() const {
    std::vector<int> rest;
    for (int q = 0; q < n_locations(); ++q)
      if (!is_accepting(q)) rest.push_back(q);
    return Dfa(locations_, initial_, alphabet_, std::move(rest), trans_);
  }

 private:
  void validate() const {
    const int nq = n_locations(), na = n_letters();
    if (nq <= 0 || na <= 0) throw std::invalid_argument("dfa: empty locations or alphabet");
    if (initial_ < 0 || initial_ >= nq) throw std::invalid_argument("dfa: bad initial location");
    for (int a : accepting_)
      if (a < 0 || a >= nq) throw std::invalid_argument("dfa: accepting location out of range");
    if (int(trans_.size()) != nq) throw std::invalid_argument("dfa: transition table not total");
    for (const auto& row : trans_) {
      if (int(row.size()) != na) throw std::invalid_argument("dfa: transition table not total");
      for (int t : row)
        if (t < 0 || t >= nq) throw std::invalid_argument("dfa: transition target out of range");
    }
  }

  std::vector<std::string> locations_;
  int initial_;
  std::vector<std::string> alphabet_;
  std::vector<int> accepting_;
  std::vector<std::vector<int>> trans_;  // [location][letter] -> location
};

/// Reach-avoid automaton for "stay in the safe letter until the target
/// letter": safe_letter self-loops at the start, target_letter jumps to an
/// accepting sink, anything else falls into a rejecting sink. Canonicalized
/// to one accepting and one rejecting sink (three reachable locations).
inline Dfa reach_avoid_dfa(const std::string& safe_letter,
                           const std::string& target_letter,
                           const std::string& other_letter) {
  if (safe_letter == target_letter || safe_letter == other_letter ||
      target_letter == other_letter)
    throw std::invalid_argument("reach_avoid_dfa: letters must be distinct");
  // locations: 0 = scanning, 1 = accepting sink, 2 = rejecting sink
  // alphabet order: safe, target, other
  std::vector<std::vector<int>> trans = {{0, 1, 2}, {1, 1, 1}, {2, 2, 2}};
  return Dfa({"q0", "q2", "q3"}, 0, {safe_letter, target_letter, other_letter},
             {1}, std::move(trans));
}

/// Two-location safety monitor: stays in the (accepting) initial location
/// while reading the safe letter, any other letter falls into a rejecting
/// sink. Satisfaction is read at the end of the horizon.
inline Dfa safety_monitor_dfa(const std::string& safe_letter,
                              const std::string& other_letter) {
  std::vector<std::vector<int>> trans = {{0, 1}, {1, 1}};
  return Dfa({"ok", "bad"}, 0, {safe_letter, other_letter}, {0}, std::move(trans));
}

/// Reachability automaton: absorbing accepting sink on the target letter.
inline Dfa reachability_dfa(const std::string& target_letter,
                            const std::string& other_letter) {
  std::vector<std::vector<int>> trans = {{1, 0}, {1, 1}};
  return Dfa({"scan", "hit"}, 0, {target_letter, other_letter}, {1},
             std::move(trans));
}

/// Ordered labeling of the output space: the first entry whose region
/// contains y wins; everything unmatched gets the default letter. Regions of
/// different letters may touch on boundaries but must not overlap in the
/// interior.
class LabelMap {
 public:
  struct Entry {
    std::string letter;
    std::vector<Box> regions;
  };

  LabelMap(std::vector<Entry> entries, std::string default_letter)
      : entries_(std::move(entries)), default_(std::move(default_letter)) {
    validate();
  }

  const std::string& label(const VectorXd& y) const {
    for (const auto& e : entries_)
      if (contains_any(e.regions, y)) return e.letter;
    return default_;
  }

  const std::string& default_letter() const { return default_; }
  const std::vector<Entry>& entries() const { return entries_; }

  std::vector<std::string> letters() const {
    std::vector<std::string> out;
    for (const auto& e : entries_) out.push_back(e.letter);
    out.push_back(default_);
    return out;
  }

  std::vector<std::string> word(const std::vector<VectorXd>& outputs) const {
    std::vector<std::string> w;
    w.reserve(outputs.size());
    for (const auto& y : outputs) w.push_back(label(y));
    return w;
  }

 private:
  void validate() const {
    if (default_.empty()) throw std::invalid_argument("labelmap: empty default letter");
    for (const auto& e : entries_) {
      if (e.letter.empty()) throw std::invalid_argument("labelmap: empty letter");
      if (e.letter == default_)
        throw std::invalid_argument("labelmap: letter equals default letter");
    }
    for (std::size_t i = 0; i < entries_.size(); ++i)
      for (std::size_t j = i + 1; j < entries_.size(); ++j)
        for (const auto& a : entries_[i].regions)
          for (const auto& b : entries_[j].regions)
            if (a.interior_intersects(b))
              throw std::invalid_argument(
                  "labelmap: regions of letters '" + entries_[i].letter +
                  "' and '" + entries_[j].letter + "' overlap");
  }

  std::vector<Entry> entries_;
  std::string default_;
};

enum class SpecKind { Safety, Reachability, ReachAvoid, DfaSpec };

inline std::string to_string(SpecKind k) {
  switch (k) {
    case SpecKind::Safety: return "safety";
    case SpecKind::Reachability: return "reachability";
    case SpecKind::ReachAvoid: return "reach-avoid";
    case SpecKind::DfaSpec: return "dfa";
  }
  return "?";
}

/// Bounded-horizon specification: safety / reachability / reach-avoid over
/// box regions, or an explicit DFA with a labeling. The horizon counts steps;
/// a word of horizon+1 letters (one per visited output) decides satisfaction.
struct HorizonSpec {
  SpecKind kind = SpecKind::Safety;
  std::vector<Box> safe;
  std::vector<Box> target;
  int horizon = 0;
  std::optional<Dfa> dfa;
  std::optional<LabelMap> labels;

  void validate() const {
    if (horizon < 0) throw std::invalid_argument("spec: horizon must be >= 0");
    switch (kind) {
      case SpecKind::Safety:
        if (safe.empty()) throw std::invalid_argument("spec: safety needs a safe region");
        break;
      case SpecKind::Reachability:
        break;  // empty target is allowed and yields zero values
      case SpecKind::ReachAvoid:
        if (safe.empty()) throw std::invalid_argument("spec: reach-avoid needs a safe region");
        break;
      case SpecKind::DfaSpec:
        if (!dfa || !labels)
          throw std::invalid_argument("spec: dfa kind needs automaton and labels");
        for (const auto& l : labels->letters()) dfa->letter_index(l);
        break;
    }
  }
};

}  // namespace prosyn
