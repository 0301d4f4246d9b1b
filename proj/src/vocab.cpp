#include "mdi/vocab.hpp"

#include <algorithm>
#include <set>

namespace mdi {

Vocabulary::Vocabulary() : tokens_{"<UNK>", "<CLS>", "<MASK>"} {
    for (int i = 0; i < size(); ++i) index_[tokens_[i]] = i;
}

Vocabulary::Vocabulary(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
    if (tokens_.size() < 3 || tokens_[0] != "<UNK>" || tokens_[1] != "<CLS>" ||
        tokens_[2] != "<MASK>")
        throw DataError(ErrCode::vocab_mismatch, "vocabulary missing reserved tokens");
    for (int i = 0; i < size(); ++i) {
        if (!index_.insert({tokens_[i], i}).second)
            throw DataError(ErrCode::vocab_mismatch, "duplicate vocabulary token: " + tokens_[i]);
    }
}

Vocabulary Vocabulary::build(const std::vector<std::vector<std::string>>& token_lists,
                             int min_freq) {
    std::map<std::string, long> freq;
    for (const auto& toks : token_lists)
        for (const std::string& t : toks) freq[t]++;
    std::vector<std::pair<std::string, long>> kept;
    for (auto& [tok, n] : freq) {
        if (n >= min_freq && tok != "<UNK>" && tok != "<CLS>" && tok != "<MASK>")
            kept.push_back({tok, n});
    }
    // Frequency-descending, then lexicographic, for a deterministic layout.
    std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    std::vector<std::string> tokens{"<UNK>", "<CLS>", "<MASK>"};
    for (auto& [tok, n] : kept) tokens.push_back(tok);
    return Vocabulary(std::move(tokens));
}

int Vocabulary::id_of(const std::string& token) const {
    auto it = index_.find(token);
    return it == index_.end() ? kUnk : it->second;
}

const std::string& Vocabulary::token_of(int id) const {
    if (id < 0 || id >= size()) throw DataError(ErrCode::out_of_range, "token id out of range");
    return tokens_[id];
}

LabelSet::LabelSet(std::vector<std::string> labels) : labels_(std::move(labels)) {
    std::sort(labels_.begin(), labels_.end());
    labels_.erase(std::unique(labels_.begin(), labels_.end()), labels_.end());
}

LabelSet LabelSet::from_values(const std::vector<std::string>& values) {
    return LabelSet(values);
}

int LabelSet::index_of(const std::string& label) const {
    auto it = std::lower_bound(labels_.begin(), labels_.end(), label);
    if (it == labels_.end() || *it != label)
        throw DataError(ErrCode::unknown_label, "label '" + label + "' not in label set");
    return static_cast<int>(it - labels_.begin());
}

const std::string& LabelSet::label_of(int idx) const {
    if (idx < 0 || idx >= size()) throw DataError(ErrCode::out_of_range, "label index out of range");
    return labels_[idx];
}

bool LabelSet::contains(const std::string& label) const {
    return std::binary_search(labels_.begin(), labels_.end(), label);
}

std::vector<std::string> model_tokens(const std::string& text, bool strip_diac, int max_len) {
    std::string t = strip_diac ? strip_diacritics(text) : text;
    std::vector<std::string> toks = tokenize_light(t);
    if (max_len > 0 && static_cast<int>(toks.size()) > max_len) toks.resize(max_len);
    return toks;
}

} // namespace mdi
