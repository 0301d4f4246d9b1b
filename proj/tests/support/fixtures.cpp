#include "support/fixtures.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "mdi/rng.hpp"

namespace mdi::testsupport {

namespace {

std::string tok_name(int i) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "w%03d", i);
    return buf;
}

TweetRecord make_tweet(const std::string& id, const std::string& user,
                       const LocationHierarchy& loc, const std::vector<std::string>& markers,
                       const SyntheticSpec& spec, RngStream& rng) {
    int len = spec.min_len +
              static_cast<int>(rng.next_below(static_cast<std::uint64_t>(
                  spec.max_len - spec.min_len + 1)));
    int chain_start = static_cast<int>(rng.next_below(spec.shared_vocab));
    std::vector<std::string> toks;
    toks.reserve(len);
    toks.push_back(markers[rng.next_below(markers.size())]);
    for (int t = 0; t < len - 2; ++t)
        toks.push_back(tok_name((chain_start + t) % spec.shared_vocab));
    toks.push_back(markers[rng.next_below(markers.size())]);

    TweetRecord r;
    r.id = id;
    r.user_id = user;
    std::ostringstream text;
    for (std::size_t i = 0; i < toks.size(); ++i) {
        if (i) text << ' ';
        text << toks[i];
    }
    r.text = text.str();
    r.labels = loc;
    return r;
}

} // namespace

SyntheticCorpus make_synthetic(const SyntheticSpec& spec) {
    SyntheticCorpus corpus;
    RngStream rng(spec.seed, "synthetic_corpus");

    int city_idx = 0;
    for (int ci = 0; ci < spec.countries; ++ci) {
        std::string country = "country" + std::to_string(ci);
        for (int si = 0; si < spec.states_per_country; ++si) {
            std::string state = country + "_state" + std::to_string(si);
            for (int ki = 0; ki < spec.cities_per_state; ++ki, ++city_idx) {
                std::string city = state + "_city" + std::to_string(ki);
                corpus.cities.push_back(city);
                GazetteerEntry e;
                e.city = city;
                e.state = state;
                e.country = country;
                e.lat = -60.0 + ci * 40.0 + si * 10.0 + ki * 2.0;
                e.lon = -90.0 + ci * 50.0 + si * 8.0 + ki * 1.5;
                corpus.entries.push_back(e);

                LocationHierarchy loc{city, state, country};
                std::vector<std::string> markers;
                for (int m = 0; m < spec.markers_per_city; ++m)
                    markers.push_back("mk" + std::to_string(city_idx) + "x" + std::to_string(m));

                RngStream crng = rng.split("city" + std::to_string(city_idx));
                for (int n = 0; n < spec.train_per_city; ++n) {
                    std::string user =
                        city + "_utr" + std::to_string(n % spec.train_users_per_city);
                    corpus.train.push_back(make_tweet(
                        "tr_" + city + "_" + std::to_string(n), user, loc, markers, spec, crng));
                }
                for (int n = 0; n < spec.test_per_city; ++n) {
                    std::string user =
                        city + "_ute" + std::to_string(n % spec.test_users_per_city);
                    corpus.test.push_back(make_tweet(
                        "te_" + city + "_" + std::to_string(n), user, loc, markers, spec, crng));
                }
            }
        }
    }
    return corpus;
}

std::string make_temp_dir(const std::string& prefix) {
    namespace fs = std::filesystem;
    std::string tmpl = (fs::temp_directory_path() / (prefix + "XXXXXX")).string();
    std::vector<char> buf(tmpl.begin(), tmpl.end());
    buf.push_back('\0');
    if (!mkdtemp(buf.data())) throw std::runtime_error("mkdtemp failed");
    return std::string(buf.data());
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream f(path);
    f << content;
}

std::string read_text_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

std::string gazetteer_to_tsv(const std::vector<GazetteerEntry>& entries) {
    std::ostringstream os;
    os << "city\tstate\tcountry\tlat\tlon\taliases\n";
    os.precision(10);
    for (const GazetteerEntry& e : entries) {
        os << e.city << '\t' << e.state << '\t' << e.country << '\t' << e.lat << '\t' << e.lon
           << '\t';
        for (std::size_t i = 0; i < e.aliases.size(); ++i) {
            if (i) os << ';';
            os << e.aliases[i];
        }
        os << '\n';
    }
    return os.str();
}

} // namespace mdi::testsupport
