#pragma once

#include <map>
#include <string>
#include <vector>

#include "mdi/corpus.hpp"

namespace mdi {

// Word-level vocabulary with reserved ids 0..2. Built from TRAIN text with a
// minimum frequency; everything else maps to <UNK>.
class Vocabulary {
  public:
    static constexpr int kUnk = 0;
    static constexpr int kCls = 1;
    static constexpr int kMask = 2;

    Vocabulary();
    explicit Vocabulary(std::vector<std::string> tokens); // full list incl. reserved

    static Vocabulary build(const std::vector<std::vector<std::string>>& token_lists,
                            int min_freq = 2);

    int id_of(const std::string& token) const;
    const std::string& token_of(int id) const;
    int size() const { return static_cast<int>(tokens_.size()); }
    const std::vector<std::string>& tokens() const { return tokens_; }
    // First non-reserved id; random-token corruption draws from [first, size).
    int first_regular_id() const { return 3; }

  private:
    std::vector<std::string> tokens_;
    std::map<std::string, int> index_;
};

// Sorted label list with O(log n) lookup.
class LabelSet {
  public:
    LabelSet() = default;
    explicit LabelSet(std::vector<std::string> labels); // sorted + deduped

    static LabelSet from_values(const std::vector<std::string>& values);

    int index_of(const std::string& label) const; // throws unknown_label
    const std::string& label_of(int idx) const;
    int size() const { return static_cast<int>(labels_.size()); }
    const std::vector<std::string>& labels() const { return labels_; }
    bool contains(const std::string& label) const;
    bool operator==(const LabelSet& o) const { return labels_ == o.labels_; }

  private:
    std::vector<std::string> labels_;
};

// Model-side tokenization: normalize (already done upstream), optionally strip
// diacritics, light-tokenize, truncate.
std::vector<std::string> model_tokens(const std::string& text, bool strip_diac, int max_len);

} // namespace mdi
