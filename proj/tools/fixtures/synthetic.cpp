#include "synthetic.hpp"

#include <algorithm>
#include <array>
#include <random>
#include <set>
#include <string_view>

namespace reclink::fixtures {

namespace {

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // Uniform in [0, n) by rejection; portable across standard libraries.
  std::size_t below(std::size_t n) {
    const std::uint64_t bound = n;
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
    std::uint64_t r;
    do r = engine_();
    while (r >= limit);
    return static_cast<std::size_t>(r % bound);
  }
  bool chance(std::size_t percent) { return below(100) < percent; }
  template <typename C>
  const auto& pick(const C& c) {
    return c[below(std::size(c))];
  }
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[below(i)]);
  }

 private:
  std::mt19937_64 engine_;
};

constexpr std::array<std::string_view, 24> kOnsets = {
    "val", "kel", "mor", "ar", "bren", "cor", "dal", "fen", "gar", "hal", "lun", "mar",
    "nor", "or", "pel", "quin", "ros", "sel", "tor", "ul", "ver", "wen", "bel", "ster"};
constexpr std::array<std::string_view, 16> kMiddles = {
    "a", "e", "i", "o", "an", "en", "ar", "or", "il", "el", "on", "ur", "am", "is", "ad", "em"};
constexpr std::array<std::string_view, 14> kCodas = {
    "ra", "ton", "dale", "field", "wick", "ford", "mont", "via", "ex", "tis", "gard", "by",
    "lin", "ridge"};

struct WordForm {
  std::string_view full;
  std::string_view short_form;
};

constexpr std::array<WordForm, 22> kIndustries = {{
    {"Technologies", "Tech"},     {"Pharmaceuticals", "Pharma"}, {"Logistics", "Logx"},
    {"Manufacturing", "Mfg"},     {"Industries", "Inds"},        {"Electronics", "Elec"},
    {"Systems", "Sys"},           {"Chemicals", "Chem"},         {"Engineering", "Engg"},
    {"Construction", "Constr"},   {"Communications", "Comms"},   {"Entertainment", "Ent"},
    {"Laboratories", "Labs"},     {"Investments", "Invt"},       {"Properties", "Pptys"},
    {"Services", "Svcs"},         {"Semiconductor", "Semi"},     {"Biotechnology", "Biotech"},
    {"Transportation", "Trans"},  {"Petroleum", "Petro"},        {"Instruments", "Instr"},
    {"Resources", "Res"},
}};

constexpr std::array<WordForm, 12> kQualifiers = {{
    {"International", "Intl"}, {"National", "Natl"},   {"American", "Amer"},
    {"Global", "Glbl"},        {"United", "Utd"},      {"General", "Genl"},
    {"Pacific", "Pac"},        {"Atlantic", "Atl"},    {"Continental", "Contl"},
    {"Northern", "Nthn"},      {"Southern", "Sthn"},   {"Advanced", "Adv"},
}};

constexpr std::array<WordForm, 10> kSuffixes = {{
    {"Corporation", "Corp"}, {"Incorporated", "Inc"}, {"Limited", "Ltd"},
    {"Company", "Co"},       {"Holdings", "Hldgs"},   {"Group", "Grp"},
    {"Associates", "Assoc"}, {"Partners", "Ptnrs"},   {"Enterprises", "Ents"},
    {"Brothers", "Bros"},
}};

std::string capitalize(std::string s) {
  if (!s.empty() && s[0] >= 'a' && s[0] <= 'z') s[0] = static_cast<char>(s[0] - 32);
  return s;
}

std::string stem(Rng& rng) {
  std::string s(rng.pick(kOnsets));
  s += rng.pick(kMiddles);
  s += rng.pick(kCodas);
  return capitalize(s);
}

// One name token with its abbreviation (identical when it has none).
struct Token {
  std::string full;
  std::string short_form;
  bool distinctive = false;
};

// Members of a brand family share the stem and differ in industry (and
// often qualifier or legal suffix).
std::vector<std::vector<Token>> family_tokens(Rng& rng, std::set<std::string>& used_stems,
                                              std::size_t members, bool two_word_name = false) {
  std::string s;
  do s = two_word_name ? stem(rng) + " " + stem(rng) : stem(rng);
  while (!used_stems.insert(s).second);
  std::vector<std::vector<Token>> family;
  std::set<std::size_t> industries;
  const WordForm* qualifier = rng.chance(40) ? &rng.pick(kQualifiers) : nullptr;
  for (std::size_t m = 0; m < members; ++m) {
    std::vector<Token> tokens;
    tokens.push_back({s, s, true});
    if (qualifier) {
      tokens.push_back({std::string(qualifier->full), std::string(qualifier->short_form)});
    }
    std::size_t ind;
    do ind = rng.below(kIndustries.size());
    while (!industries.insert(ind).second);
    tokens.push_back({std::string(kIndustries[ind].full), std::string(kIndustries[ind].short_form)});
    const auto& suf = rng.pick(kSuffixes);
    tokens.push_back({std::string(suf.full), std::string(suf.short_form)});
    family.push_back(std::move(tokens));
  }
  return family;
}

std::string typo(Rng& rng, std::string word) {
  if (word.size() < 4) return word;
  const std::size_t i = 1 + rng.below(word.size() - 2);
  switch (rng.below(3)) {
    case 0:  // adjacent swap
      std::swap(word[i], word[i + 1 < word.size() ? i + 1 : i - 1]);
      break;
    case 1:  // deletion
      word.erase(i, 1);
      break;
    default: {  // substitution with a neighbouring letter
      char c = word[i];
      if (c >= 'a' && c <= 'z') word[i] = static_cast<char>('a' + (c - 'a' + 1) % 26);
      break;
    }
  }
  return word;
}

std::string join(const std::vector<std::string>& words) {
  std::string out;
  for (const auto& w : words) {
    if (w.empty()) continue;
    if (!out.empty()) out += ' ';
    out += w;
  }
  return out;
}

std::string make_alias(Rng& rng, const std::vector<Token>& tokens, bool heavy) {
  std::vector<std::string> words;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const auto& t = tokens[i];
    const bool last = i + 1 == tokens.size();
    std::string w = t.full;
    if (!t.distinctive && rng.chance(heavy ? 70 : 50)) w = t.short_form;
    // Legal suffixes and qualifiers are often omitted; the industry is kept.
    const bool industry = !t.distinctive && !last && i + 2 == tokens.size();
    if (heavy && !t.distinctive && !industry && rng.chance(35)) w.clear();
    // Alias lists are inconsistent about the legal form.
    if (heavy && last && !w.empty() && rng.chance(35)) w = rng.pick(kSuffixes).short_form;
    if (rng.chance(t.distinctive ? 20 : 10)) w = typo(rng, w);
    if (rng.chance(8)) {
      std::transform(w.begin(), w.end(), w.begin(),
                     [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
    }
    words.push_back(std::move(w));
  }
  if (heavy && words.size() >= 3 && rng.chance(20)) {
    const std::size_t i = rng.below(words.size() - 1);
    std::swap(words[i], words[i + 1]);
  }
  if (heavy && rng.chance(10)) words.insert(words.begin(), "The");
  auto out = join(words);
  if (out.empty()) out = tokens.front().full;
  return out;
}

// Near-duplicate: abbreviations and at most one adjacent-character swap.
std::string make_variant(Rng& rng, const std::vector<Token>& tokens) {
  std::vector<std::string> words;
  for (const auto& t : tokens) {
    words.push_back(!t.distinctive && rng.chance(50) ? t.short_form : t.full);
  }
  if (rng.chance(40)) {
    auto& w = words[rng.below(words.size())];
    if (w.size() >= 4) {
      const std::size_t i = 1 + rng.below(w.size() - 2);
      std::swap(w[i], w[i + 1]);
    }
  }
  return join(words);
}

}  // namespace

AliasBenchmark make_alias_benchmark(const AliasBenchmarkOptions& options) {
  Rng rng(options.seed);
  std::set<std::string> used;
  // Families of 2-4 firms until the entity budget is spent.
  std::vector<std::vector<Firm>> families;
  std::size_t made = 0;
  while (made < options.entities) {
    const std::size_t size = std::min<std::size_t>(2 + rng.below(3), options.entities - made);
    std::vector<Firm> family;
    for (const auto& tokens : family_tokens(rng, used, size)) {
      Firm f;
      f.id = "F" + std::to_string(1000 + made++);
      std::vector<std::string> words;
      for (const auto& t : tokens) words.push_back(t.full);
      f.canonical = join(words);
      std::set<std::string> seen{f.canonical};
      for (int attempt = 0; f.aliases.size() < options.aliases_per_entity; ++attempt) {
        auto alias = make_alias(rng, tokens, true);
        if (seen.insert(alias).second || attempt > 50) f.aliases.push_back(std::move(alias));
      }
      family.push_back(std::move(f));
    }
    families.push_back(std::move(family));
  }
  rng.shuffle(families);

  // Whole families go to one split so held-out firms never have a sibling in
  // training.
  AliasBenchmark out;
  for (auto& family : families) {
    auto* split = &out.test;
    if (out.train.size() < options.train_entities) split = &out.train;
    else if (out.validation.size() < options.validation_entities) split = &out.validation;
    for (auto& f : family) split->push_back(std::move(f));
  }
  return out;
}

PlantedPartition make_planted_partition(std::size_t entities, std::size_t variants,
                                        std::uint64_t seed) {
  Rng rng(seed);
  std::set<std::string> used;
  PlantedPartition out;
  for (std::size_t e = 0; e < entities; ++e) {
    for (const auto& tokens : family_tokens(rng, used, 1, true)) {
      std::set<std::string> seen;
      std::size_t made = 0;
      for (int attempt = 0; made < variants; ++attempt) {
        auto v = make_variant(rng, tokens);
        if (!seen.insert(v).second && attempt < 50) continue;
        out.texts.push_back(std::move(v));
        out.truth.push_back(e);
        ++made;
      }
    }
  }
  // Interleave entities so clusters are not contiguous in row order.
  std::vector<std::size_t> order(out.texts.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  rng.shuffle(order);
  PlantedPartition shuffled;
  for (auto i : order) {
    shuffled.texts.push_back(out.texts[i]);
    shuffled.truth.push_back(out.truth[i]);
  }
  return shuffled;
}

Table cluster_rows_table(const std::vector<Firm>& firms) {
  std::vector<std::vector<std::string>> rows;
  for (const auto& f : firms) {
    rows.push_back({f.id, f.canonical});
    for (const auto& a : f.aliases) rows.push_back({f.id, a});
  }
  return Table({"cluster_id", "text"}, std::move(rows));
}

Table keys_table(const std::vector<Firm>& firms) {
  std::vector<std::vector<std::string>> rows;
  for (std::size_t i = 0; i < firms.size(); ++i) {
    rows.push_back({std::to_string(i), firms[i].id, firms[i].canonical});
  }
  return Table({"key_id", "firm_id", "name"}, std::move(rows));
}

Table queries_table(const std::vector<Firm>& firms) {
  std::vector<std::vector<std::string>> rows;
  for (const auto& f : firms) {
    for (const auto& a : f.aliases) rows.push_back({std::to_string(rows.size()), f.id, a});
  }
  return Table({"query_id", "firm_id", "name"}, std::move(rows));
}

Table gold_table(const std::vector<Firm>& firms) {
  std::vector<std::vector<std::string>> rows;
  std::size_t q = 0;
  for (std::size_t k = 0; k < firms.size(); ++k) {
    for (std::size_t a = 0; a < firms[k].aliases.size(); ++a) {
      rows.push_back({std::to_string(q++), std::to_string(k)});
    }
  }
  return Table({"query_id", "key_id"}, std::move(rows));
}

}  // namespace reclink::fixtures
