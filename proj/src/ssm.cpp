#include "enko/ssm.hpp"

#include <cmath>
#include <fstream>

#include "enko/binio.hpp"

namespace enko {

namespace {
constexpr char kCheckpointMagic[] = "ENKOCKPT";
constexpr std::uint32_t kCheckpointVersion = 1;
}  // namespace

int ParamLayout::add(const std::string& name, std::vector<int> shape, bool log_scale) {
    ParamEntry e;
    e.name = name;
    e.offset = total_;
    e.shape = std::move(shape);
    e.log_scale = log_scale;
    total_ += static_cast<int>(e.count());
    entries_.push_back(std::move(e));
    return entries_.back().offset;
}

const ParamEntry& ParamLayout::find(const std::string& name) const {
    for (const auto& e : entries_)
        if (e.name == name) return e;
    throw std::invalid_argument("unknown parameter: " + name);
}

std::pair<ad::Node, std::unique_ptr<BoundModel>> SsmModel::bind_fresh(
    ad::Tape& tape, bool requires_grad) const {
    ad::Node leaf = tape.leaf(params_, requires_grad);
    return {leaf, bind(tape, leaf)};
}

Tensor SsmModel::get(const std::string& name) const {
    const ParamEntry& e = layout_.find(name);
    std::vector<double> v(params_.data() + e.offset, params_.data() + e.offset + e.count());
    return Tensor(e.shape, std::move(v));
}

void SsmModel::set(const std::string& name, const Tensor& value) {
    const ParamEntry& e = layout_.find(name);
    check(value.size() == e.count(), "set " + name + ": size mismatch");
    for (long i = 0; i < value.size(); ++i) params_.at(e.offset + i) = value.at(i);
}

void SsmModel::set_all(const std::string& name, double value) {
    const ParamEntry& e = layout_.find(name);
    for (long i = 0; i < e.count(); ++i) params_.at(e.offset + i) = value;
}

namespace {

ad::Node view(const ad::Node& p, const ParamEntry& e) {
    ad::Node s = ad::slice_vec(p, e.offset, static_cast<int>(e.count()));
    if (e.shape.size() == 2) return ad::reshape(s, e.shape);
    return s;
}

Dist replicated_gaussian(const ad::Node& mean_vec, const ad::Node& log_std_vec, int n) {
    return Dist::diag_gaussian(ad::replicate_row(mean_vec, n),
                               ad::replicate_row(log_std_vec, n));
}

}  // namespace

// ---------------------------------------------------------------------------
// linear-Gaussian

LinearGaussianSsm::LinearGaussianSsm(int dz, int dx) : SsmModel(dz, dx) {
    layout_.add("mu_q1", {dz});
    layout_.add("log_sigma_q1", {dz}, true);
    layout_.add("A_q", {dz, dz});
    layout_.add("log_sigma_q", {dz}, true);
    layout_.add("mu_f1", {dz});
    layout_.add("log_sigma_f1", {dz}, true);
    layout_.add("A_f", {dz, dz});
    layout_.add("log_sigma_f", {dz}, true);
    layout_.add("A_g", {dx, dz});
    layout_.add("log_sigma_g", {dx}, true);
    params_ = Tensor::zeros({layout_.total()});
    Tensor eye = Tensor::eye(dz);
    set("A_q", eye);
    set("A_f", eye);
    set_all("log_sigma_q1", std::log(0.5));
    set_all("log_sigma_f1", std::log(0.5));
    set_all("log_sigma_q", std::log(0.5));
    set_all("log_sigma_f", std::log(0.5));
    set_all("log_sigma_g", std::log(0.5));
    Tensor ag = Tensor::zeros({dx, dz});
    for (int i = 0; i < std::min(dx, dz); ++i) ag(i, i) = 1.0;
    set("A_g", ag);
}

void LinearGaussianSsm::init_benchmark(Rng& rng) {
    set_all("mu_q1", 0.0);
    set_all("mu_f1", 0.0);
    set_all("log_sigma_q1", std::log(0.1));
    set_all("log_sigma_f1", std::log(0.1));
    set_all("log_sigma_q", std::log(0.01));
    set_all("log_sigma_f", std::log(0.01));
    set_all("log_sigma_g", std::log(0.01));
    auto near_identity = [&](int d) {
        Tensor a = Tensor::eye(d);
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j) a(i, j) += 0.1 * rng.uniform() - 0.05;
        return a;
    };
    set("A_q", near_identity(dz_));
    set("A_f", near_identity(dz_));
    Tensor ag = Tensor::zeros({dx_, dz_});
    for (long i = 0; i < ag.size(); ++i) ag.at(i) = rng.uniform() - 0.5;
    set("A_g", ag);
}

LgssmGenerative LinearGaussianSsm::generative() const {
    auto exp_all = [](Tensor t) {
        for (long i = 0; i < t.size(); ++i) t.at(i) = std::exp(t.at(i));
        return t;
    };
    LgssmGenerative g;
    g.mu1 = get("mu_f1");
    g.sigma1 = exp_all(get("log_sigma_f1"));
    g.a_f = get("A_f");
    g.sigma_f = exp_all(get("log_sigma_f"));
    g.a_g = get("A_g");
    g.sigma_g = exp_all(get("log_sigma_g"));
    return g;
}

namespace {

class LinearGaussianBound : public BoundModel {
  public:
    LinearGaussianBound(const LinearGaussianSsm& m, ad::Tape& tape, const ad::Node& p) {
        const ParamLayout& l = m.layout();
        mu_q1_ = view(p, l.find("mu_q1"));
        ls_q1_ = view(p, l.find("log_sigma_q1"));
        a_q_t_ = ad::transpose(view(p, l.find("A_q")));
        ls_q_ = view(p, l.find("log_sigma_q"));
        mu_f1_ = view(p, l.find("mu_f1"));
        ls_f1_ = view(p, l.find("log_sigma_f1"));
        a_f_t_ = ad::transpose(view(p, l.find("A_f")));
        ls_f_ = view(p, l.find("log_sigma_f"));
        a_g_t_ = ad::transpose(view(p, l.find("A_g")));
        ls_g_ = view(p, l.find("log_sigma_g"));
        (void)tape;
    }

    Dist initial_dist(int n) override { return replicated_gaussian(mu_f1_, ls_f1_, n); }
    Dist transition_dist(const ad::Node& z) override {
        return Dist::diag_gaussian(ad::matmul(z, a_f_t_), ad::replicate_row(ls_f_, z.rows()));
    }
    Dist emission_dist(const ad::Node& z) override {
        return Dist::diag_gaussian(ad::matmul(z, a_g_t_), ad::replicate_row(ls_g_, z.rows()));
    }
    Dist proposal_initial(const Tensor&, int n) override {
        return replicated_gaussian(mu_q1_, ls_q1_, n);
    }
    Dist proposal_dist(const ad::Node& z, const Tensor&) override {
        return Dist::diag_gaussian(ad::matmul(z, a_q_t_), ad::replicate_row(ls_q_, z.rows()));
    }

  private:
    ad::Node mu_q1_, ls_q1_, a_q_t_, ls_q_;
    ad::Node mu_f1_, ls_f1_, a_f_t_, ls_f_;
    ad::Node a_g_t_, ls_g_;
};

}  // namespace

std::unique_ptr<SsmModel> LinearGaussianSsm::clone() const {
    return std::make_unique<LinearGaussianSsm>(*this);
}

std::unique_ptr<BoundModel> LinearGaussianSsm::bind(ad::Tape& tape,
                                                    const ad::Node& p) const {
    return std::make_unique<LinearGaussianBound>(*this, tape, p);
}

// ---------------------------------------------------------------------------
// nonlinear Student-t

NonlinearStudentSsm::NonlinearStudentSsm(int dz, int dx, double df)
    : SsmModel(dz, dx), df_(df) {
    layout_.add("mu_q1", {dz});
    layout_.add("log_sigma_q1", {dz}, true);
    layout_.add("C_q", {dz, dz * dz});
    layout_.add("A_q", {dz, dz});
    layout_.add("b_q", {dz});
    layout_.add("log_sigma_q", {dz}, true);
    layout_.add("mu_f1", {dz});
    layout_.add("log_sigma_f1", {dz}, true);
    layout_.add("C_f", {dz, dz * dz});
    layout_.add("A_f", {dz, dz});
    layout_.add("b_f", {dz});
    layout_.add("log_sigma_f", {dz}, true);
    layout_.add("C_g", {dx, dz * dz});
    layout_.add("A_g", {dx, dz});
    layout_.add("b_g", {dx});
    layout_.add("log_sigma_g", {dx}, true);
    params_ = Tensor::zeros({layout_.total()});
    set("A_q", Tensor::eye(dz));
    set("A_f", Tensor::eye(dz));
    set_all("log_sigma_q1", std::log(0.5));
    set_all("log_sigma_f1", std::log(0.5));
    set_all("log_sigma_q", std::log(0.5));
    set_all("log_sigma_f", std::log(0.5));
    set_all("log_sigma_g", std::log(0.5));
}

void NonlinearStudentSsm::init_benchmark(Rng& rng) {
    set_all("mu_q1", 0.0);
    set_all("mu_f1", 0.0);
    set_all("log_sigma_q1", std::log(0.1));
    set_all("log_sigma_f1", std::log(0.1));
    set_all("log_sigma_q", std::log(0.01));
    set_all("log_sigma_f", std::log(0.01));
    set_all("log_sigma_g", std::log(0.01));
    auto fill_uniform = [&](const std::string& name, double half_range) {
        const ParamEntry& e = layout_.find(name);
        Tensor t = Tensor::zeros(e.shape);
        for (long i = 0; i < t.size(); ++i) t.at(i) = 2.0 * half_range * rng.uniform() - half_range;
        return t;
    };
    auto near_identity = [&](int d) {
        Tensor a = Tensor::eye(d);
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j) a(i, j) += 0.1 * rng.uniform() - 0.05;
        return a;
    };
    set("A_q", near_identity(dz_));
    set("A_f", near_identity(dz_));
    set("A_g", fill_uniform("A_g", 0.5));
    set("C_q", fill_uniform("C_q", 0.05));
    set("C_f", fill_uniform("C_f", 0.05));
    set("C_g", fill_uniform("C_g", 0.05));
    set_all("b_q", 0.0);
    set_all("b_f", 0.0);
    set_all("b_g", 0.0);
}

namespace {

class NonlinearStudentBound : public BoundModel {
  public:
    NonlinearStudentBound(const NonlinearStudentSsm& m, const ad::Node& p) : df_(m.df()) {
        const ParamLayout& l = m.layout();
        mu_q1_ = view(p, l.find("mu_q1"));
        ls_q1_ = view(p, l.find("log_sigma_q1"));
        c_q_t_ = ad::transpose(view(p, l.find("C_q")));
        a_q_t_ = ad::transpose(view(p, l.find("A_q")));
        b_q_ = view(p, l.find("b_q"));
        ls_q_ = view(p, l.find("log_sigma_q"));
        mu_f1_ = view(p, l.find("mu_f1"));
        ls_f1_ = view(p, l.find("log_sigma_f1"));
        c_f_t_ = ad::transpose(view(p, l.find("C_f")));
        a_f_t_ = ad::transpose(view(p, l.find("A_f")));
        b_f_ = view(p, l.find("b_f"));
        ls_f_ = view(p, l.find("log_sigma_f"));
        c_g_t_ = ad::transpose(view(p, l.find("C_g")));
        a_g_t_ = ad::transpose(view(p, l.find("A_g")));
        b_g_ = view(p, l.find("b_g"));
        ls_g_ = view(p, l.find("log_sigma_g"));
    }

    ad::Node mean_map(const ad::Node& z, const ad::Node& c_t, const ad::Node& a_t,
                      const ad::Node& b) {
        ad::Node quad = ad::matmul(ad::row_outer_flatten(z), c_t);
        ad::Node lin = ad::matmul(z, a_t);
        return ad::tanh(ad::add_rowvec(ad::add(quad, lin), b));
    }

    Dist initial_dist(int n) override { return replicated_gaussian(mu_f1_, ls_f1_, n); }
    Dist transition_dist(const ad::Node& z) override {
        return Dist::student_t(df_, mean_map(z, c_f_t_, a_f_t_, b_f_),
                               ad::replicate_row(ls_f_, z.rows()));
    }
    Dist emission_dist(const ad::Node& z) override {
        return Dist::student_t(df_, mean_map(z, c_g_t_, a_g_t_, b_g_),
                               ad::replicate_row(ls_g_, z.rows()));
    }
    Dist proposal_initial(const Tensor&, int n) override {
        return replicated_gaussian(mu_q1_, ls_q1_, n);
    }
    Dist proposal_dist(const ad::Node& z, const Tensor&) override {
        return Dist::diag_gaussian(mean_map(z, c_q_t_, a_q_t_, b_q_),
                                   ad::replicate_row(ls_q_, z.rows()));
    }

  private:
    double df_;
    ad::Node mu_q1_, ls_q1_, c_q_t_, a_q_t_, b_q_, ls_q_;
    ad::Node mu_f1_, ls_f1_, c_f_t_, a_f_t_, b_f_, ls_f_;
    ad::Node c_g_t_, a_g_t_, b_g_, ls_g_;
};

}  // namespace

std::unique_ptr<SsmModel> NonlinearStudentSsm::clone() const {
    return std::make_unique<NonlinearStudentSsm>(*this);
}

std::unique_ptr<BoundModel> NonlinearStudentSsm::bind(ad::Tape&, const ad::Node& p) const {
    return std::make_unique<NonlinearStudentBound>(*this, p);
}

// ---------------------------------------------------------------------------
// neural

namespace {

struct MlpNames {
    std::string w1, b1, wm, bm, ws, bs;
    explicit MlpNames(const std::string& prefix)
        : w1(prefix + ".W1"),
          b1(prefix + ".b1"),
          wm(prefix + ".W_mean"),
          bm(prefix + ".b_mean"),
          ws(prefix + ".W_logstd"),
          bs(prefix + ".b_logstd") {}
};

void add_mlp(ParamLayout& layout, const std::string& prefix, int in, int hidden, int out) {
    MlpNames n(prefix);
    layout.add(n.w1, {hidden, in});
    layout.add(n.b1, {hidden});
    layout.add(n.wm, {out, hidden});
    layout.add(n.bm, {out});
    layout.add(n.ws, {out, hidden});
    layout.add(n.bs, {out});
}

struct BoundMlp {
    ad::Node w1_t, b1, wm_t, bm, ws_t, bs;

    BoundMlp() = default;
    BoundMlp(const ParamLayout& l, const ad::Node& p, const std::string& prefix) {
        MlpNames n(prefix);
        w1_t = ad::transpose(view(p, l.find(n.w1)));
        b1 = view(p, l.find(n.b1));
        wm_t = ad::transpose(view(p, l.find(n.wm)));
        bm = view(p, l.find(n.bm));
        ws_t = ad::transpose(view(p, l.find(n.ws)));
        bs = view(p, l.find(n.bs));
    }

    Dist gaussian(const ad::Node& input) const {
        ad::Node h = ad::tanh(ad::add_rowvec(ad::matmul(input, w1_t), b1));
        ad::Node mean = ad::add_rowvec(ad::matmul(h, wm_t), bm);
        ad::Node log_std = ad::add_rowvec(ad::matmul(h, ws_t), bs);
        return Dist::diag_gaussian(mean, log_std);
    }
};

class NeuralBound : public BoundModel {
  public:
    NeuralBound(const NeuralSsm& m, ad::Tape& tape, const ad::Node& p) : tape_(&tape) {
        const ParamLayout& l = m.layout();
        mu_f1_ = view(p, l.find("mu_f1"));
        ls_f1_ = view(p, l.find("log_sigma_f1"));
        trans_ = BoundMlp(l, p, "trans");
        emis_ = BoundMlp(l, p, "emis");
        prop_ = BoundMlp(l, p, "prop");
        prop1_ = BoundMlp(l, p, "prop1");
    }

    Dist initial_dist(int n) override { return replicated_gaussian(mu_f1_, ls_f1_, n); }
    Dist transition_dist(const ad::Node& z) override { return trans_.gaussian(z); }
    Dist emission_dist(const ad::Node& z) override { return emis_.gaussian(z); }
    Dist proposal_initial(const Tensor& xseq, int n) override {
        Tensor x1 = Tensor::zeros({1, xseq.cols()});
        for (int j = 0; j < xseq.cols(); ++j) x1(0, j) = xseq(0, j);
        Dist d1 = prop1_.gaussian(tape_->constant(std::move(x1)));
        ad::Node mean = ad::replicate_row(ad::reshape(d1.mean, {d1.mean.cols()}), n);
        ad::Node ls = ad::replicate_row(ad::reshape(d1.log_std, {d1.log_std.cols()}), n);
        return Dist::diag_gaussian(mean, ls);
    }
    Dist proposal_dist(const ad::Node& z, const Tensor& xt) override {
        Tensor xrep = Tensor::zeros({z.rows(), xt.dim(0)});
        for (int i = 0; i < z.rows(); ++i)
            for (int j = 0; j < xt.dim(0); ++j) xrep(i, j) = xt(j);
        ad::Node input = ad::concat_cols(z, tape_->constant(std::move(xrep)));
        return prop_.gaussian(input);
    }

  private:
    ad::Tape* tape_;
    ad::Node mu_f1_, ls_f1_;
    BoundMlp trans_, emis_, prop_, prop1_;
};

}  // namespace

NeuralSsm::NeuralSsm(int dz, int dx, int hidden) : SsmModel(dz, dx), hidden_(hidden) {
    layout_.add("mu_f1", {dz});
    layout_.add("log_sigma_f1", {dz}, true);
    add_mlp(layout_, "trans", dz, hidden, dz);
    add_mlp(layout_, "emis", dz, hidden, dx);
    add_mlp(layout_, "prop", dz + dx, hidden, dz);
    add_mlp(layout_, "prop1", dx, hidden, dz);
    params_ = Tensor::zeros({layout_.total()});
    set_all("log_sigma_f1", std::log(0.5));
}

void NeuralSsm::init_weights(Rng& rng) {
    for (const auto& e : layout_.entries()) {
        if (e.name == "mu_f1") continue;
        if (e.name == "log_sigma_f1") {
            set_all(e.name, std::log(0.5));
            continue;
        }
        const bool is_weight = e.shape.size() == 2;
        const bool logstd_bias = e.name.ends_with("b_logstd");
        const int fan_in = is_weight ? e.shape[1] : 1;
        const double r = is_weight ? 1.0 / std::sqrt(static_cast<double>(fan_in)) : 0.0;
        Tensor t = Tensor::zeros(e.shape);
        for (long i = 0; i < t.size(); ++i)
            t.at(i) = is_weight ? (2.0 * rng.uniform() - 1.0) * r : 0.0;
        if (logstd_bias)
            for (long i = 0; i < t.size(); ++i) t.at(i) = -1.0;
        set(e.name, t);
    }
}

std::unique_ptr<SsmModel> NeuralSsm::clone() const { return std::make_unique<NeuralSsm>(*this); }

std::unique_ptr<BoundModel> NeuralSsm::bind(ad::Tape& tape, const ad::Node& p) const {
    return std::make_unique<NeuralBound>(*this, tape, p);
}

// ---------------------------------------------------------------------------

std::unique_ptr<SsmModel> make_model(const std::string& kind, int dz, int dx, int hidden) {
    if (kind == "lgssm") return std::make_unique<LinearGaussianSsm>(dz, dx);
    if (kind == "nonlinear_student") return std::make_unique<NonlinearStudentSsm>(dz, dx);
    if (kind == "neural") return std::make_unique<NeuralSsm>(dz, dx, hidden);
    throw std::invalid_argument("unknown model kind: " + kind);
}

void save_checkpoint(const std::string& path, const SsmModel& model,
                     const std::string& config_echo) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write checkpoint: " + path);
    os.write(kCheckpointMagic, 8);
    binio::write_u32(os, kCheckpointVersion);
    binio::write_str(os, model.kind());
    binio::write_u32(os, static_cast<std::uint32_t>(model.dz()));
    binio::write_u32(os, static_cast<std::uint32_t>(model.dx()));
    binio::write_u32(os, static_cast<std::uint32_t>(model.hidden()));
    binio::write_f64s(os, model.params().storage());
    binio::write_str(os, config_echo);
    if (!os) throw std::runtime_error("checkpoint write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot read checkpoint: " + path);
    char magic[8];
    is.read(magic, 8);
    if (!is || std::string(magic, 8) != kCheckpointMagic)
        throw std::runtime_error("bad checkpoint magic: " + path);
    std::uint32_t version = binio::read_u32(is);
    if (version != kCheckpointVersion)
        throw std::runtime_error("unsupported checkpoint version " + std::to_string(version));
    std::string kind = binio::read_str(is);
    int dz = static_cast<int>(binio::read_u32(is));
    int dx = static_cast<int>(binio::read_u32(is));
    int hidden = static_cast<int>(binio::read_u32(is));
    std::vector<double> params = binio::read_f64s(is);
    std::string echo = binio::read_str(is);

    Checkpoint cp;
    cp.model = make_model(kind, dz, dx, hidden);
    check(static_cast<long>(params.size()) == cp.model->params().size(),
          "checkpoint parameter count mismatch");
    cp.model->params() = Tensor({cp.model->layout().total()}, std::move(params));
    cp.config_echo = std::move(echo);
    return cp;
}

}  // namespace enko
