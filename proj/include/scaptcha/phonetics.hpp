#pragma once

#include <filesystem>
#include <istream>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace scaptcha {

/// The 39 stress-free ARPAbet symbols.
const std::vector<std::string>& arpabet_symbols();
bool is_arpabet(std::string_view symbol);

using PhonemeSequence = std::vector<std::string>;

class PronouncingDictionary {
 public:
  /// CMU dict line format: "WORD  PH1 PH2 ...", alternates as "WORD(2) ...",
  /// comments start with ";;;". Stress digits are stripped.
  static PronouncingDictionary parse(std::istream& in);
  static PronouncingDictionary load(const std::filesystem::path& path);

  void add(std::string word, PhonemeSequence pronunciation);

  /// Variants for an uppercase word, or nullptr.
  const std::vector<PhonemeSequence>* find(std::string_view word) const;
  bool contains(std::string_view word) const { return find(word) != nullptr; }
  std::size_t size() const noexcept { return entries_.size(); }

 private:
  std::map<std::string, std::vector<PhonemeSequence>, std::less<>> entries_;
};

/// Uppercased words with punctuation stripped; apostrophes are kept.
std::vector<std::string> dictionary_words(std::string_view text);

/// First pronunciation of every word. Throws OutOfVocabularyError listing all
/// missing words.
std::vector<PhonemeSequence> to_phonemes(const PronouncingDictionary& dict, std::string_view text);

/// Unit-cost Levenshtein distance between token sequences.
template <typename T>
std::size_t levenshtein(std::span<const T> a, std::span<const T> b) {
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

/// Phoneme-level Levenshtein between the concatenated pronunciations of two
/// texts, minimised over the pronunciation variants of every word.
std::size_t phonetic_distance(std::string_view a, std::string_view b, const PronouncingDictionary& dict);

/// Levenshtein over case-folded whitespace-delimited words.
std::size_t word_edit_distance(std::string_view reference, std::string_view hypothesis);

}  // namespace scaptcha
