#pragma once

#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "enko/distributions.hpp"
#include "enko/kalman.hpp"

namespace enko {

struct ParamEntry {
    std::string name;
    int offset = 0;
    std::vector<int> shape;
    bool log_scale = false;  // stored as log sigma
    long count() const {
        long n = 1;
        for (int d : shape) n *= d;
        return n;
    }
};

class ParamLayout {
  public:
    int add(const std::string& name, std::vector<int> shape, bool log_scale = false);
    const ParamEntry& find(const std::string& name) const;
    const std::vector<ParamEntry>& entries() const { return entries_; }
    int total() const { return total_; }

  private:
    std::vector<ParamEntry> entries_;
    int total_ = 0;
};

// Per-evaluation view of a model with its parameter vector bound onto a tape.
// All constructors are pure functions of the bound parameters and their
// arguments. Distribution means double as the emission mean map h(z).
class BoundModel {
  public:
    virtual ~BoundModel() = default;
    virtual Dist initial_dist(int n) = 0;                       // f(z1), n rows
    virtual Dist transition_dist(const ad::Node& zprev) = 0;    // f(z_t | z_{t-1})
    virtual Dist emission_dist(const ad::Node& z) = 0;          // g(x_t | z_t)
    virtual Dist proposal_initial(const Tensor& xseq, int n) = 0;  // q(z1 | x)
    virtual Dist proposal_dist(const ad::Node& zprev, const Tensor& xt) = 0;
};

class SsmModel {
  public:
    virtual ~SsmModel() = default;
    int dz() const { return dz_; }
    int dx() const { return dx_; }
    Tensor& params() { return params_; }
    const Tensor& params() const { return params_; }
    const ParamLayout& layout() const { return layout_; }

    virtual std::string kind() const = 0;
    virtual int hidden() const { return 0; }
    virtual std::unique_ptr<SsmModel> clone() const = 0;
    virtual std::unique_ptr<BoundModel> bind(ad::Tape& tape,
                                             const ad::Node& param_leaf) const = 0;

    // Registers the parameter vector as a leaf and binds the model to it.
    std::pair<ad::Node, std::unique_ptr<BoundModel>> bind_fresh(ad::Tape& tape,
                                                                bool requires_grad = true) const;

    Tensor get(const std::string& name) const;
    void set(const std::string& name, const Tensor& value);
    void set_all(const std::string& name, double value);

  protected:
    SsmModel(int dz, int dx) : dz_(dz), dx_(dx) {}
    int dz_ = 0, dx_ = 0;
    ParamLayout layout_;
    Tensor params_;
};

// Linear-Gaussian model: proposal N(A_q z, sigma_q^2), transition
// N(A_f z, sigma_f^2), emission N(A_g z, sigma_g^2), Gaussian initials.
class LinearGaussianSsm : public SsmModel {
  public:
    LinearGaussianSsm(int dz, int dx);
    std::string kind() const override { return "lgssm"; }
    std::unique_ptr<SsmModel> clone() const override;
    std::unique_ptr<BoundModel> bind(ad::Tape&, const ad::Node&) const override;

    // Near-identity transitions with small noise: A = I + U(-0.05, 0.05),
    // emission entries U(-0.5, 0.5), sigma1 = 0.1, process/obs sigma = 0.01.
    void init_benchmark(Rng& rng);
    LgssmGenerative generative() const;
};

// Nonlinear non-Gaussian model: mean maps tanh(C vec(z z^T) + A z + b);
// Student-t transition/emission with fixed df, Gaussian proposal.
class NonlinearStudentSsm : public SsmModel {
  public:
    NonlinearStudentSsm(int dz, int dx, double df = 5.0);
    std::string kind() const override { return "nonlinear_student"; }
    std::unique_ptr<SsmModel> clone() const override;
    std::unique_ptr<BoundModel> bind(ad::Tape&, const ad::Node&) const override;
    double df() const { return df_; }

    void init_benchmark(Rng& rng);

  private:
    double df_ = 5.0;
};

// Neural model: one-hidden-layer tanh MLPs for transition, emission, and the
// causal proposal q(z_t | z^f_{t-1}, x_t); a separate head proposes z_1 from
// x_1. Gaussian everywhere, diagonal log-std heads.
class NeuralSsm : public SsmModel {
  public:
    NeuralSsm(int dz, int dx, int hidden);
    std::string kind() const override { return "neural"; }
    int hidden() const override { return hidden_; }
    std::unique_ptr<SsmModel> clone() const override;
    std::unique_ptr<BoundModel> bind(ad::Tape&, const ad::Node&) const override;

    void init_weights(Rng& rng);  // uniform fan-in scaling

  private:
    int hidden_ = 32;
};

std::unique_ptr<SsmModel> make_model(const std::string& kind, int dz, int dx, int hidden);

void save_checkpoint(const std::string& path, const SsmModel& model,
                     const std::string& config_echo);
struct Checkpoint {
    std::unique_ptr<SsmModel> model;
    std::string config_echo;
};
Checkpoint load_checkpoint(const std::string& path);

}  // namespace enko
