#include "enko/dataset.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "enko/binio.hpp"

namespace enko {

namespace {
constexpr char kDatasetMagic[] = "ENKODATA";
constexpr std::uint32_t kDatasetVersion = 1;
}  // namespace

Tensor Dataset::sequence(int i) const {
    check(i >= 0 && i < b(), "sequence index out of range");
    Tensor out = Tensor::zeros({t(), dx()});
    for (int s = 0; s < t(); ++s)
        for (int j = 0; j < dx(); ++j) out(s, j) = sequences(i, s, j);
    return out;
}

Tensor Dataset::latent(int i) const {
    check(!latents.empty(), "dataset has no latents");
    check(i >= 0 && i < b(), "latent index out of range");
    Tensor out = Tensor::zeros({t(), dz()});
    for (int s = 0; s < t(); ++s)
        for (int j = 0; j < dz(); ++j) out(s, j) = latents(i, s, j);
    return out;
}

std::vector<int> Dataset::train_indices() const {
    std::vector<int> v(n_train);
    std::iota(v.begin(), v.end(), 0);
    return v;
}

std::vector<int> Dataset::valid_indices() const {
    std::vector<int> v(n_valid);
    std::iota(v.begin(), v.end(), n_train);
    return v;
}

std::vector<int> Dataset::test_indices() const {
    std::vector<int> v(n_test);
    std::iota(v.begin(), v.end(), n_train + n_valid);
    return v;
}

void Dataset::apply_abs_div_scaling() {
    check(n_train > 0, "abs-div scaling needs a training split");
    scale = Tensor::full({dx()}, 1.0);
    for (int j = 0; j < dx(); ++j) {
        double m = 0.0;
        for (int i = 0; i < n_train; ++i)
            for (int s = 0; s < t(); ++s) m = std::max(m, std::abs(sequences(i, s, j)));
        if (m > 0.0) scale(j) = m;
    }
    for (int i = 0; i < b(); ++i)
        for (int s = 0; s < t(); ++s)
            for (int j = 0; j < dx(); ++j) sequences(i, s, j) /= scale(j);
}

void save_dataset(const Dataset& ds, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write dataset: " + path);
    os.write(kDatasetMagic, 8);
    binio::write_u32(os, kDatasetVersion);
    binio::write_u32(os, static_cast<std::uint32_t>(ds.b()));
    binio::write_u32(os, static_cast<std::uint32_t>(ds.t()));
    binio::write_u32(os, static_cast<std::uint32_t>(ds.dx()));
    binio::write_u32(os, static_cast<std::uint32_t>(ds.dz()));
    binio::write_u32(os, static_cast<std::uint32_t>(ds.n_train));
    binio::write_u32(os, static_cast<std::uint32_t>(ds.n_valid));
    binio::write_u32(os, static_cast<std::uint32_t>(ds.n_test));
    binio::write_u64(os, ds.seed);
    binio::write_str(os, ds.generator);
    binio::write_str(os, ds.config_echo);
    binio::write_f64s(os, ds.scale.storage());
    binio::write_f64s(os, ds.sequences.storage());
    binio::write_f64s(os, ds.latents.storage());
    if (!os) throw std::runtime_error("dataset write failed: " + path);
}

Dataset load_dataset(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot read dataset: " + path);
    char magic[8];
    is.read(magic, 8);
    if (!is || std::string(magic, 8) != kDatasetMagic)
        throw std::runtime_error("bad dataset magic: " + path);
    std::uint32_t version = binio::read_u32(is);
    if (version != kDatasetVersion)
        throw std::runtime_error("unsupported dataset version " + std::to_string(version));
    int b = static_cast<int>(binio::read_u32(is));
    int t = static_cast<int>(binio::read_u32(is));
    int dx = static_cast<int>(binio::read_u32(is));
    int dz = static_cast<int>(binio::read_u32(is));

    Dataset ds;
    ds.n_train = static_cast<int>(binio::read_u32(is));
    ds.n_valid = static_cast<int>(binio::read_u32(is));
    ds.n_test = static_cast<int>(binio::read_u32(is));
    ds.seed = binio::read_u64(is);
    ds.generator = binio::read_str(is);
    ds.config_echo = binio::read_str(is);
    ds.scale = Tensor({dx}, binio::read_f64s(is));
    ds.sequences = Tensor({b, t, dx}, binio::read_f64s(is));
    std::vector<double> lat = binio::read_f64s(is);
    if (!lat.empty()) ds.latents = Tensor({b, t, dz}, std::move(lat));
    return ds;
}

std::string dataset_summary(const Dataset& ds) {
    std::ostringstream os;
    os << "generator=" << ds.generator << "\n";
    os << "sequences=" << ds.b() << " length=" << ds.t() << " dx=" << ds.dx()
       << " dz=" << ds.dz() << "\n";
    os << "splits train/valid/test=" << ds.n_train << "/" << ds.n_valid << "/" << ds.n_test
       << "\n";
    os << "seed=" << ds.seed << "\n";
    os << "scale=";
    for (int j = 0; j < ds.dx(); ++j) os << (j ? "," : "") << ds.scale(j);
    os << "\n";
    return os.str();
}

void export_sequences_csv(const Dataset& ds, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot write csv: " + path);
    os << "sequence,step,split";
    for (int j = 0; j < ds.dx(); ++j) os << ",x" << j;
    os << "\n";
    char buf[64];
    for (int i = 0; i < ds.b(); ++i) {
        const char* split = i < ds.n_train            ? "train"
                            : i < ds.n_train + ds.n_valid ? "valid"
                                                          : "test";
        for (int s = 0; s < ds.t(); ++s) {
            os << i << ',' << s << ',' << split;
            for (int j = 0; j < ds.dx(); ++j) {
                std::snprintf(buf, sizeof buf, "%.17g", ds.sequences(i, s, j));
                os << ',' << buf;
            }
            os << "\n";
        }
    }
}

}  // namespace enko
