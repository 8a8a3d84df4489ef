#include "gains/solver.hpp"

#include <algorithm>
#include <cmath>

namespace gains {

std::string to_string(TableauId id) {
  switch (id) {
    case TableauId::Euler: return "euler";
    case TableauId::Dopri5: return "dopri5";
    case TableauId::Dopri8: return "dopri8";
  }
  return "?";
}

TableauId tableau_from_string(const std::string& name) {
  if (name == "euler") return TableauId::Euler;
  if (name == "dopri5") return TableauId::Dopri5;
  if (name == "dopri8") return TableauId::Dopri8;
  throw Error("unknown tableau \"" + name + "\" (expected euler, dopri5 or dopri8)");
}

double SolverConfig::tau_alpha() const { return std::pow(static_cast<double>(alpha), -order); }

std::int64_t SolverConfig::step_cap() const {
  if (max_steps) return *max_steps;
  return static_cast<std::int64_t>(std::ceil(10.0 * t_end / h_min));
}

void SolverConfig::validate() const {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw Error("invariant violated: solver_cfg." + what);
  };
  require(alpha >= 2, "alpha must be an integer >= 2");
  require(std::isfinite(tau) && tau > 0.0, "tau must be positive");
  require(std::isfinite(h_min) && h_min > 0.0, "h_min must be positive");
  require(std::isfinite(eta) && eta > 0.0, "eta must be positive");
  require(beta > 0.0 && beta < 1.0, "beta must lie in (0, 1)");
  require(std::isfinite(t_end) && t_end > 0.0, "t_end must be positive");
  require(order >= 1, "order must be a positive integer");
  require(max_rejections_after_clip >= 0, "max_rejections_after_clip must be non-negative");
  require(h_min <= t_end, "h_min must not exceed t_end");
  require(!max_steps || *max_steps > 0, "max_steps must be positive");
  const double ta = tau_alpha();
  require(ta > 0.0 && ta < 1.0, "tau_alpha must lie in (0, 1)");
}

namespace {

Tableau make_euler() { return {TableauId::Euler, 1, {0.0}, {{}}, {1.0}, {}}; }

Tableau make_dopri5() {
  Tableau t;
  t.id = TableauId::Dopri5;
  t.order = 5;
  t.c = {0.0, 1.0 / 5, 3.0 / 10, 4.0 / 5, 8.0 / 9, 1.0, 1.0};
  t.a = {
      {},
      {1.0 / 5},
      {3.0 / 40, 9.0 / 40},
      {44.0 / 45, -56.0 / 15, 32.0 / 9},
      {19372.0 / 6561, -25360.0 / 2187, 64448.0 / 6561, -212.0 / 729},
      {9017.0 / 3168, -355.0 / 33, 46732.0 / 5247, 49.0 / 176, -5103.0 / 18656},
      {35.0 / 384, 0.0, 500.0 / 1113, 125.0 / 192, -2187.0 / 6784, 11.0 / 84},
  };
  t.b = {35.0 / 384, 0.0, 500.0 / 1113, 125.0 / 192, -2187.0 / 6784, 11.0 / 84, 0.0};
  const std::vector<double> b_hat = {5179.0 / 57600,    0.0,           7571.0 / 16695, 393.0 / 640,
                                     -92097.0 / 339200, 187.0 / 2100, 1.0 / 40};
  t.e.resize(7);
  for (std::size_t i = 0; i < 7; ++i) t.e[i] = t.b[i] - b_hat[i];
  return t;
}

// DOP853 with its 5th order embedded estimate.
Tableau make_dopri8() {
  Tableau t;
  t.id = TableauId::Dopri8;
  t.order = 8;
  t.c = {0.0,
         0.526001519587677318785587544488e-01,
         0.789002279381515978178381316732e-01,
         0.118350341907227396726757197510e+00,
         0.281649658092772603273242802490e+00,
         0.333333333333333333333333333333e+00,
         0.25e+00,
         0.307692307692307692307692307692e+00,
         0.651282051282051282051282051282e+00,
         0.6e+00,
         0.857142857142857142857142857142e+00,
         1.0};
  t.a.assign(12, {});
  for (std::size_t i = 0; i < 12; ++i) t.a[i].assign(i, 0.0);
  t.a[1][0] = 5.26001519587677318785587544488e-2;
  t.a[2][0] = 1.97250569845378994544595329183e-2;
  t.a[2][1] = 5.91751709536136983633785987549e-2;
  t.a[3][0] = 2.95875854768068491816892993775e-2;
  t.a[3][2] = 8.87627564304205475450678981324e-2;
  t.a[4][0] = 2.41365134159266685502369798665e-1;
  t.a[4][2] = -8.84549479328286085344864962717e-1;
  t.a[4][3] = 9.24834003261792003115737966543e-1;
  t.a[5][0] = 3.7037037037037037037037037037e-2;
  t.a[5][3] = 1.70828608729473871279604482173e-1;
  t.a[5][4] = 1.25467687566822425016691814123e-1;
  t.a[6][0] = 3.7109375e-2;
  t.a[6][3] = 1.70252211019544039314978060272e-1;
  t.a[6][4] = 6.02165389804559606850219397283e-2;
  t.a[6][5] = -1.7578125e-2;
  t.a[7][0] = 3.70920001185047927108779319836e-2;
  t.a[7][3] = 1.70383925712239993810214054705e-1;
  t.a[7][4] = 1.07262030446373284651809199168e-1;
  t.a[7][5] = -1.53194377486244017527936158236e-2;
  t.a[7][6] = 8.27378916381402288758473766002e-3;
  t.a[8][0] = 6.24110958716075717114429577812e-1;
  t.a[8][3] = -3.36089262944694129406857109825e0;
  t.a[8][4] = -8.68219346841726006818189891453e-1;
  t.a[8][5] = 2.75920996994467083049415600797e1;
  t.a[8][6] = 2.01540675504778934086186788979e1;
  t.a[8][7] = -4.34898841810699588477366255144e1;
  t.a[9][0] = 4.77662536438264365890433908527e-1;
  t.a[9][3] = -2.48811461997166764192642586468e0;
  t.a[9][4] = -5.90290826836842996371446475743e-1;
  t.a[9][5] = 2.12300514481811942347288949897e1;
  t.a[9][6] = 1.52792336328824235832596922938e1;
  t.a[9][7] = -3.32882109689848629194453265587e1;
  t.a[9][8] = -2.03312017085086261358222928593e-2;
  t.a[10][0] = -9.3714243008598732571704021658e-1;
  t.a[10][3] = 5.18637242884406370830023853209e0;
  t.a[10][4] = 1.09143734899672957818500254654e0;
  t.a[10][5] = -8.14978701074692612513997267357e0;
  t.a[10][6] = -1.85200656599969598641566180701e1;
  t.a[10][7] = 2.27394870993505042818970056734e1;
  t.a[10][8] = 2.49360555267965238987089396762e0;
  t.a[10][9] = -3.0467644718982195003823669022e0;
  t.a[11][0] = 2.27331014751653820792359768449e0;
  t.a[11][3] = -1.05344954667372501984066689879e1;
  t.a[11][4] = -2.00087205822486249909675718444e0;
  t.a[11][5] = -1.79589318631187989172765950534e1;
  t.a[11][6] = 2.79488845294199600508499808837e1;
  t.a[11][7] = -2.85899827713502369474065508674e0;
  t.a[11][8] = -8.87285693353062954433549289258e0;
  t.a[11][9] = 1.23605671757943030647266201528e1;
  t.a[11][10] = 6.43392746015763530355970484046e-1;
  t.b = {5.42937341165687622380535766363e-2,
         0.0,
         0.0,
         0.0,
         0.0,
         4.45031289275240888144113950566e0,
         1.89151789931450038304281599044e0,
         -5.8012039600105847814672114227e0,
         3.1116436695781989440891606237e-1,
         -1.52160949662516078556178806805e-1,
         2.01365400804030348374776537501e-1,
         4.47106157277725905176885569043e-2};
  t.e = {0.1312004499419488073250102996e-01,
         0.0,
         0.0,
         0.0,
         0.0,
         -0.1225156446376204440720569753e+01,
         -0.4957589496572501915214079952e+00,
         0.1664377182454986536961530415e+01,
         -0.3503288487499736816886487290e+00,
         0.3341791187130174790297318841e+00,
         0.8192320648511571246570742613e-01,
         -0.2235530786388629525884427845e-01};
  return t;
}

void check_finite(const Vector& v, double t, const char* what) {
  if (!all_finite(v)) {
    throw DivergenceError(std::string("solver diverged: non-finite ") + what + " at t=" +
                          format_double(t));
  }
}

void require_embedded(const Tableau& tab) {
  if (!tab.embedded()) {
    throw Error("tableau " + to_string(tab.id) + " has no error estimate; adaptive control needs an embedded pair");
  }
}

}  // namespace

const Tableau& tableau(TableauId id) {
  static const Tableau euler = make_euler();
  static const Tableau dopri5 = make_dopri5();
  static const Tableau dopri8 = make_dopri8();
  switch (id) {
    case TableauId::Euler: return euler;
    case TableauId::Dopri5: return dopri5;
    case TableauId::Dopri8: return dopri8;
  }
  return dopri5;
}

StepResult rk_step(const VectorField& g, const Vector& z, double t, double h, const Tableau& tab) {
  if (!(h > 0.0)) throw Error("rk_step: step size must be positive");
  check_finite(z, t, "state");
  const Index n = z.size();
  const std::size_t s = tab.stages();
  std::vector<Vector> k(s);
  for (std::size_t i = 0; i < s; ++i) {
    Vector x = z;
    for (std::size_t j = 0; j < i; ++j) {
      if (tab.a[i][j] == 0.0) continue;
      const double coef = h * tab.a[i][j];
      for (Index r = 0; r < n; ++r) x[r] += coef * k[j][r];
    }
    k[i] = g(t + tab.c[i] * h, x);
    if (k[i].size() != n) throw DimensionError("vector field changed the state dimension");
    check_finite(k[i], t, "stage derivative");
  }
  StepResult out;
  out.z_hat1 = z;
  for (std::size_t i = 0; i < s; ++i) {
    if (tab.b[i] == 0.0) continue;
    const double coef = h * tab.b[i];
    for (Index r = 0; r < n; ++r) out.z_hat1[r] += coef * k[i][r];
  }
  out.error = Vector::Zero(n);
  for (std::size_t i = 0; i < tab.e.size(); ++i) {
    if (tab.e[i] == 0.0) continue;
    const double coef = h * tab.e[i];
    for (Index r = 0; r < n; ++r) out.error[r] += coef * k[i][r];
  }
  check_finite(out.z_hat1, t, "solution");
  if (tab.embedded()) out.z_hat2 = out.z_hat1 - out.error;
  return out;
}

StepResult rk_step(const Dynamics& dyn, const Vector& z, double t, double h, TableauId id) {
  return rk_step(dyn.field(), z, t, h, tableau(id));
}

double error_ratio(const Vector& error, double tau) {
  return l1_interval_norm(Box::point(error), tau).hi;
}

char decision_letter(Decision d) {
  switch (d) {
    case Decision::Increase: return 'i';
    case Decision::Accept: return 'a';
    case Decision::Decrease: return 'd';
  }
  return '?';
}

std::string to_string(Decision d) {
  switch (d) {
    case Decision::Increase: return "increase";
    case Decision::Accept: return "accept";
    case Decision::Decrease: return "decrease";
  }
  return "?";
}

Decision cas_decide(double delta, double tau_alpha) {
  if (delta <= tau_alpha) return Decision::Increase;
  if (delta <= 1.0) return Decision::Accept;
  return Decision::Decrease;
}

std::string StepKey::to_string() const {
  return format_double(t.to_double()) + "," + format_double(h.to_double());
}

bool processed_before(const StepKey& a, const StepKey& b) {
  if (a.t != b.t) return a.t < b.t;
  return a.h > b.h;
}

StepGrid::StepGrid(const SolverConfig& cfg)
    : t_end_(Rational::from_double(cfg.t_end)),
      h0_(Rational::from_double(cfg.eta)),
      h_min_(Rational::from_double(cfg.h_min)),
      alpha_(cfg.alpha),
      max_clip_rejections_(cfg.max_rejections_after_clip) {
  cfg.validate();
}

std::pair<StepKey, bool> StepGrid::clip(const Rational& t, const Rational& h) const {
  if (t >= t_end_) return {terminal_key(), false};
  const Rational rest = t_end_ - t;
  if (h > rest) return {StepKey{t, rest}, true};
  return {StepKey{t, h}, false};
}

Rational StepGrid::grid_below(const Rational& h) const {
  const Rational a(alpha_);
  Rational g = h0_;
  while (g >= h) g = g / a;
  while (g * a < h) g = g * a;
  return g;
}

StepKey StepGrid::entry_key() const { return clip(Rational(), h0_).first; }

ControlState StepGrid::entry_state() const {
  ControlState s;
  s.clipped = clip(Rational(), h0_).second;
  return s;
}

StepGrid::Transition StepGrid::next(const StepKey& key, const ControlState& state, Decision d) const {
  if (key.terminal()) throw Error("no transition out of the terminal state");
  const Rational t_next = key.t + key.h;
  if (state.forced) d = Decision::Accept;
  switch (d) {
    case Decision::Increase: {
      auto [k, c] = clip(t_next, key.h * Rational(alpha_));
      return {k, ControlState{false, c, 0}, Decision::Increase};
    }
    case Decision::Accept: {
      auto [k, c] = clip(t_next, key.h);
      return {k, ControlState{state.forced, c, 0}, Decision::Accept};
    }
    case Decision::Decrease: {
      // a clipped remainder is usually off the h0·α^k grid; rounding the
      // divided step down to the grid keeps the node count bounded
      const Rational h_next = state.clipped ? grid_below(key.h) : key.h / Rational(alpha_);
      const bool exhausted = state.clipped && state.clip_rejections + 1 > max_clip_rejections_;
      if (h_next < h_min_ || exhausted) {
        auto [k, c] = clip(t_next, key.h);
        return {k, ControlState{true, c, 0}, Decision::Accept};
      }
      ControlState s{false, state.clipped, state.clipped ? state.clip_rejections + 1 : 0};
      return {StepKey{key.t, h_next}, s, Decision::Decrease};
    }
  }
  throw Error("invalid decision");
}

CasResult cas_integrate(const VectorField& g, const Vector& z0, const SolverConfig& cfg) {
  const StepGrid grid(cfg);
  const Tableau& tab = tableau(cfg.tableau);
  require_embedded(tab);
  const std::int64_t cap = cfg.step_cap();
  const double tau_alpha = cfg.tau_alpha();

  CasResult res;
  Vector z = z0;
  StepKey key = grid.entry_key();
  ControlState state = grid.entry_state();
  while (!key.terminal()) {
    if (res.steps() >= cap) {
      throw Error("CAS step budget of " + std::to_string(cap) + " exhausted at (" +
                  key.to_string() + ")");
    }
    const StepResult step = rk_step(g, z, key.t.to_double(), key.h.to_double(), tab);
    const Decision d = cas_decide(error_ratio(step.error, cfg.tau), tau_alpha);
    const auto tr = grid.next(key, state, d);
    if (tr.edge != Decision::Decrease) z = step.z_hat1;
    res.trajectory.keys.push_back(key);
    res.trajectory.decisions.push_back(tr.edge);
    key = tr.key;
    state = tr.state;
  }
  res.trajectory.keys.push_back(key);
  res.z_final = std::move(z);
  return res;
}

CasResult cas_integrate(const Dynamics& dyn, const Vector& z0, const SolverConfig& cfg) {
  if (z0.size() != dyn.state_dim) {
    throw DimensionError("initial state has dim " + std::to_string(z0.size()) +
                         ", dynamics expects " + std::to_string(dyn.state_dim));
  }
  return cas_integrate(dyn.field(), z0, cfg);
}

double as_step_factor(double delta, int order) {
  if (delta <= 0.0) return 10.0;
  return std::clamp(std::pow(delta, -1.0 / order), 0.2, 10.0);
}

AsResult as_integrate(const VectorField& g, const Vector& z0, const SolverConfig& cfg) {
  cfg.validate();
  const Tableau& tab = tableau(cfg.tableau);
  require_embedded(tab);
  const std::int64_t cap = cfg.step_cap();
  AsResult res;
  Vector z = z0;
  double t = 0.0;
  double h = std::min(cfg.eta, cfg.t_end);
  while (t < cfg.t_end) {
    if (res.attempted >= cap) {
      throw Error("AS step budget of " + std::to_string(cap) + " exhausted at t=" + format_double(t));
    }
    const bool last = h >= cfg.t_end - t;
    if (last) h = cfg.t_end - t;
    if (!(h > 0.0) || t + h == t) throw DivergenceError("AS step size underflow at t=" + format_double(t));
    const StepResult step = rk_step(g, z, t, h, tab);
    const double delta = error_ratio(step.error, cfg.tau);
    ++res.attempted;
    if (delta <= 1.0) {
      z = step.z_hat1;
      t = last ? cfg.t_end : t + h;
      ++res.accepted;
    }
    h *= as_step_factor(delta, tab.order);
  }
  res.z_final = std::move(z);
  return res;
}

AsResult as_integrate(const Dynamics& dyn, const Vector& z0, const SolverConfig& cfg) {
  return as_integrate(dyn.field(), z0, cfg);
}

double proposal_initial_step(double z0_norm, double g0_norm, double gamma) {
  if (!(gamma > 0.0)) throw Error("proposal_initial_step: gamma must be positive");
  const double thresh = 1e-5 * gamma;
  if (z0_norm >= thresh && g0_norm >= thresh) return z0_norm / (100.0 * g0_norm);
  return 1e-5;
}

double initial_step_proposal(const VectorField& g, const Vector& z0, double gamma,
                             const SolverConfig& cfg) {
  const Tableau& tab = tableau(cfg.tableau);
  require_embedded(tab);
  const double h_prop = proposal_initial_step(l1_norm(z0), l1_norm(g(0.0, z0)), gamma);
  const StepResult probe = rk_step(g, z0, 0.0, h_prop, tab);
  return h_prop * as_step_factor(error_ratio(probe.error, cfg.tau), tab.order);
}

double ema_update(double eta, double h0, double beta) { return (1.0 - beta) * eta + beta * h0; }

ForwardResult forward(const ModelSpec& model, const Vector& input) {
  ForwardResult r;
  r.z0 = eval_layers(model.encoder, input, std::nullopt);
  r.solve = cas_integrate(model.dynamics, r.z0, model.solver);
  r.output = eval_layers(model.decoder, r.solve.z_final, std::nullopt);
  return r;
}

}  // namespace gains
