#include "scaptcha/phonetics.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "scaptcha/error.hpp"
#include "scaptcha/text.hpp"

namespace scaptcha {

const std::vector<std::string>& arpabet_symbols() {
  static const std::vector<std::string> symbols = {
      "AA", "AE", "AH", "AO", "AW", "AY", "B",  "CH", "D",  "DH", "EH", "ER", "EY",
      "F",  "G",  "HH", "IH", "IY", "JH", "K",  "L",  "M",  "N",  "NG", "OW", "OY",
      "P",  "R",  "S",  "SH", "T",  "TH", "UH", "UW", "V",  "W",  "Y",  "Z",  "ZH"};
  return symbols;
}

bool is_arpabet(std::string_view symbol) {
  static const std::set<std::string, std::less<>> lookup(arpabet_symbols().begin(), arpabet_symbols().end());
  return lookup.contains(symbol);
}

namespace {

std::string upper(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return out;
}

// "READ(2)" -> "READ"; a malformed suffix is a parse error.
std::string base_word(const std::string& token, std::size_t line_no) {
  const auto open = token.find('(');
  if (open == std::string::npos || open == 0) return token;
  if (token.back() != ')' || open + 2 > token.size() - 1) {
    throw Error(ErrorKind::ParseError, "line " + std::to_string(line_no) + ": malformed variant '" + token + "'");
  }
  const auto digits = token.substr(open + 1, token.size() - open - 2);
  if (!std::all_of(digits.begin(), digits.end(), [](unsigned char c) { return std::isdigit(c); })) {
    throw Error(ErrorKind::ParseError, "line " + std::to_string(line_no) + ": malformed variant '" + token + "'");
  }
  return token.substr(0, open);
}

}  // namespace

PronouncingDictionary PronouncingDictionary::parse(std::istream& in) {
  PronouncingDictionary dict;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.rfind(";;;", 0) == 0) continue;
    std::istringstream fields(line);
    std::string word;
    if (!(fields >> word)) continue;
    PhonemeSequence phones;
    std::string token;
    while (fields >> token) {
      while (!token.empty() && std::isdigit(static_cast<unsigned char>(token.back()))) token.pop_back();
      token = upper(token);
      if (!is_arpabet(token)) {
        throw Error(ErrorKind::UnknownPhoneme, "line " + std::to_string(line_no) + ": '" + token + "'");
      }
      phones.push_back(token);
    }
    if (phones.empty()) {
      throw Error(ErrorKind::ParseError, "line " + std::to_string(line_no) + ": '" + word + "' has no phonemes");
    }
    dict.add(base_word(upper(word), line_no), std::move(phones));
  }
  return dict;
}

PronouncingDictionary PronouncingDictionary::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::IoError, "cannot open dictionary " + path.string());
  return parse(in);
}

void PronouncingDictionary::add(std::string word, PhonemeSequence pronunciation) {
  entries_[upper(word)].push_back(std::move(pronunciation));
}

const std::vector<PhonemeSequence>* PronouncingDictionary::find(std::string_view word) const {
  const auto it = entries_.find(word);
  return it == entries_.end() ? nullptr : &it->second;
}

std::vector<std::string> dictionary_words(std::string_view text) {
  std::vector<std::string> words;
  std::string current;
  auto flush = [&] {
    // Apostrophes only count inside a word ("don't"), not as quotes around it.
    while (!current.empty() && current.front() == '\'') current.erase(current.begin());
    while (!current.empty() && current.back() == '\'') current.pop_back();
    if (!current.empty()) words.push_back(current);
    current.clear();
  };
  for (char c : text) {
    const auto u = static_cast<unsigned char>(c);
    if (std::isalnum(u) || c == '\'') {
      current.push_back(static_cast<char>(std::toupper(u)));
    } else if (std::isspace(u) || c == '-') {
      flush();
    }
  }
  flush();
  return words;
}

namespace {

std::vector<const std::vector<PhonemeSequence>*> lookup_all(const PronouncingDictionary& dict,
                                                            const std::vector<std::string>& words,
                                                            std::vector<std::string>& missing) {
  std::vector<const std::vector<PhonemeSequence>*> out;
  for (const auto& w : words) {
    const auto* variants = dict.find(w);
    if (variants == nullptr) {
      missing.push_back(w);
    } else {
      out.push_back(variants);
    }
  }
  return out;
}

// Every combination of per-word variants is enumerated up to this many;
// beyond it the first variants are refined by coordinate descent.
constexpr std::size_t kMaxAssignments = 4096;

PhonemeSequence concat(const std::vector<const std::vector<PhonemeSequence>*>& words,
                       const std::vector<std::size_t>& choice) {
  PhonemeSequence out;
  for (std::size_t w = 0; w < words.size(); ++w) {
    const auto& p = (*words[w])[choice[w]];
    out.insert(out.end(), p.begin(), p.end());
  }
  return out;
}

bool next_choice(const std::vector<const std::vector<PhonemeSequence>*>& words, std::vector<std::size_t>& choice) {
  for (std::size_t w = 0; w < words.size(); ++w) {
    if (++choice[w] < words[w]->size()) return true;
    choice[w] = 0;
  }
  return false;
}

std::size_t assignment_count(const std::vector<const std::vector<PhonemeSequence>*>& words) {
  std::size_t count = 1;
  for (const auto* v : words) {
    if (count > kMaxAssignments / std::max<std::size_t>(1, v->size())) return kMaxAssignments + 1;
    count *= v->size();
  }
  return count;
}

std::vector<PhonemeSequence> all_sequences(const std::vector<const std::vector<PhonemeSequence>*>& words) {
  std::vector<PhonemeSequence> out;
  std::vector<std::size_t> choice(words.size(), 0);
  do {
    out.push_back(concat(words, choice));
  } while (next_choice(words, choice));
  return out;
}

std::size_t seq_distance(const PhonemeSequence& a, const PhonemeSequence& b) {
  return levenshtein<std::string>(a, b);
}

std::size_t descend(const std::vector<const std::vector<PhonemeSequence>*>& wa,
                    const std::vector<const std::vector<PhonemeSequence>*>& wb) {
  std::vector<std::size_t> ca(wa.size(), 0), cb(wb.size(), 0);
  std::size_t best = seq_distance(concat(wa, ca), concat(wb, cb));
  bool improved = true;
  while (improved && best > 0) {
    improved = false;
    auto sweep = [&](const std::vector<const std::vector<PhonemeSequence>*>& words, std::vector<std::size_t>& choice) {
      for (std::size_t w = 0; w < words.size(); ++w) {
        const std::size_t keep = choice[w];
        for (std::size_t v = 0; v < words[w]->size(); ++v) {
          if (v == keep) continue;
          choice[w] = v;
          const std::size_t d = seq_distance(concat(wa, ca), concat(wb, cb));
          if (d < best) {
            best = d;
            improved = true;
            break;
          }
          choice[w] = keep;
        }
      }
    };
    sweep(wa, ca);
    sweep(wb, cb);
  }
  return best;
}

}  // namespace

std::vector<PhonemeSequence> to_phonemes(const PronouncingDictionary& dict, std::string_view text) {
  const auto words = dictionary_words(text);
  std::vector<std::string> missing;
  const auto found = lookup_all(dict, words, missing);
  if (!missing.empty()) throw OutOfVocabularyError(std::move(missing));
  std::vector<PhonemeSequence> out;
  out.reserve(found.size());
  for (const auto* variants : found) out.push_back(variants->front());
  return out;
}

std::size_t phonetic_distance(std::string_view a, std::string_view b, const PronouncingDictionary& dict) {
  std::vector<std::string> missing;
  const auto wa = lookup_all(dict, dictionary_words(a), missing);
  const auto wb = lookup_all(dict, dictionary_words(b), missing);
  if (!missing.empty()) throw OutOfVocabularyError(std::move(missing));

  const std::size_t na = assignment_count(wa);
  const std::size_t nb = assignment_count(wb);
  if (na > kMaxAssignments || nb > kMaxAssignments || na * nb > kMaxAssignments) return descend(wa, wb);

  const auto sa = all_sequences(wa);
  const auto sb = all_sequences(wb);
  std::size_t best = std::numeric_limits<std::size_t>::max();
  for (const auto& x : sa) {
    for (const auto& y : sb) best = std::min(best, seq_distance(x, y));
  }
  return best;
}

std::size_t word_edit_distance(std::string_view reference, std::string_view hypothesis) {
  const auto ref = tokenize(reference);
  const auto hyp = tokenize(hypothesis);
  return levenshtein<std::string>(ref, hyp);
}

}  // namespace scaptcha
