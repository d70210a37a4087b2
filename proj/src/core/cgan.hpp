#ifndef E2I_CORE_CGAN_HPP
#define E2I_CORE_CGAN_HPP

#include <filesystem>
#include <string>
#include <vector>

#include "adam.hpp"
#include "augment.hpp"
#include "container.hpp"
#include "dataio.hpp"
#include "encoder.hpp"
#include "losses.hpp"
#include "metrics.hpp"

namespace e2i {

// ---------------------------------------------------------------- generator

// [z || psi] -> dense -> 4x4xF0 -> transpose-conv blocks (k4 s2 p1, channels
// halving with a floor of 8, batch norm + ReLU) -> 3x3 conv -> tanh.
template <class S>
struct GeneratorModel {
    int64_t z_dim = 128, cond_dim = 128, img_size = 0, f0 = 256;
    nn::Param<S> fc_w, fc_b;  // [16*f0, z+cond]
    nn::BatchNorm<S> bn0;
    struct Stage {
        nn::Param<S> w, b;  // w [cin, cout, 4, 4]
        nn::BatchNorm<S> bn;
        int64_t cin = 0, cout = 0;
    };
    std::vector<Stage> stages;
    nn::Param<S> head_w, head_b;  // [3, c_last, 3, 3]

    void init(Rng& rng, int64_t z, int64_t cond, int64_t img, int64_t base) {
        require(img >= 8 && is_power_of_two(img), Status::config,
                "generator: image size must be a power of two >= 8");
        require(z > 0 && cond > 0 && base >= 8, Status::config, "generator: bad dimensions");
        z_dim = z;
        cond_dim = cond;
        img_size = img;
        f0 = base;
        fc_w.resize({16 * f0, z_dim + cond_dim});
        fc_b.resize({16 * f0});
        nn::init_normal(rng, fc_w.value, 0.0, 0.02);
        bn0.init(f0);
        stages.clear();
        int64_t cur = f0;
        for (int64_t res = 4; res < img; res *= 2) {
            Stage st;
            st.cin = cur;
            st.cout = std::max<int64_t>(cur / 2, 8);
            st.w.resize({st.cin, st.cout, 4, 4});
            st.b.resize({st.cout});
            nn::init_normal(rng, st.w.value, 0.0, 0.02);
            st.bn.init(st.cout);
            cur = st.cout;
            stages.push_back(std::move(st));
        }
        head_w.resize({3, cur, 3, 3});
        head_b.resize({3});
        nn::init_normal(rng, head_w.value, 0.0, 0.02);
    }

    struct Cache {
        Tensor<S> zin;     // [N, z+cond]
        Tensor<S> fc_out;  // [N, f0, 4, 4]
        typename nn::BatchNorm<S>::Cache bn0c;
        Tensor<S> a0;  // post bn+relu
        struct StageCache {
            Tensor<S> pre_bn;
            typename nn::BatchNorm<S>::Cache bnc;
            Tensor<S> act;
        };
        std::vector<StageCache> st;
        Tensor<S> img;  // post tanh
        Tensor<S> scratch;
    };

    // -> images [N, 3, H, W]
    Tensor<S> forward(const Tensor<S>& z, const Tensor<S>& psi, bool train, Cache& c) {
        require(z.ndim() == 2 && psi.ndim() == 2 && z.dim(0) == psi.dim(0), Status::shape,
                "generator: z/psi batch mismatch");
        require(z.dim(1) == z_dim && psi.dim(1) == cond_dim, Status::shape,
                "generator: z/psi width mismatch");
        const int64_t n = z.dim(0);
        c.zin = Tensor<S>({n, z_dim + cond_dim});
        for (int64_t i = 0; i < n; ++i) {
            std::copy(z.ptr() + i * z_dim, z.ptr() + (i + 1) * z_dim,
                      c.zin.ptr() + i * (z_dim + cond_dim));
            std::copy(psi.ptr() + i * cond_dim, psi.ptr() + (i + 1) * cond_dim,
                      c.zin.ptr() + i * (z_dim + cond_dim) + z_dim);
        }
        Tensor<S> fc2d;
        nn::dense_forward(c.zin, fc_w, fc_b, fc2d);
        fc2d.reshape({n, f0, 4, 4});
        c.fc_out = std::move(fc2d);
        bn0.forward(c.fc_out, train, c.a0, train ? &c.bn0c : nullptr);
        nn::relu_forward(c.a0);
        c.st.assign(stages.size(), typename Cache::StageCache{});
        const Tensor<S>* cur = &c.a0;
        for (size_t i = 0; i < stages.size(); ++i) {
            auto& st = stages[i];
            auto& sc = c.st[i];
            nn::convt2d_forward(*cur, st.w, st.b, 4, 2, 1, sc.pre_bn);
            st.bn.forward(sc.pre_bn, train, sc.act, train ? &sc.bnc : nullptr);
            nn::relu_forward(sc.act);
            cur = &sc.act;
        }
        nn::conv2d_forward(*cur, head_w, head_b, 3, 1, 1, c.img, c.scratch);
        nn::tanh_forward(c.img);
        return c.img;
    }

    void backward(Cache& c, const Tensor<S>& gimg) {
        Tensor<S> g = gimg;
        nn::tanh_backward(c.img, g);
        const Tensor<S>& head_in = stages.empty() ? c.a0 : c.st.back().act;
        Tensor<S> gcur;
        nn::conv2d_backward(head_in, head_w, head_b, 3, 1, 1, g, &gcur, c.scratch);
        for (size_t i = stages.size(); i-- > 0;) {
            auto& st = stages[i];
            auto& sc = c.st[i];
            nn::relu_backward(sc.act, gcur);
            Tensor<S> gpre;
            st.bn.backward(sc.bnc, gcur, gpre);
            const Tensor<S>& in = i == 0 ? c.a0 : c.st[i - 1].act;
            nn::convt2d_backward(in, st.w, st.b, 4, 2, 1, gpre, &gcur);
        }
        nn::relu_backward(c.a0, gcur);
        Tensor<S> gfc;
        bn0.backward(c.bn0c, gcur, gfc);
        gfc.reshape({gfc.dim(0), 16 * f0});
        nn::dense_backward<S>(c.zin, fc_w, fc_b, gfc, nullptr);
    }

    std::vector<nn::Param<S>*> params() {
        std::vector<nn::Param<S>*> p{&fc_w, &fc_b, &bn0.gamma, &bn0.beta};
        for (auto& st : stages) {
            p.push_back(&st.w);
            p.push_back(&st.b);
            p.push_back(&st.bn.gamma);
            p.push_back(&st.bn.beta);
        }
        p.push_back(&head_w);
        p.push_back(&head_b);
        return p;
    }
};

// ---------------------------------------------------------------- discriminator

// Mirror stack: conv k4 s2 p1 blocks with leaky-ReLU 0.2 (no batch norm on
// the first), psi affine-projected and broadcast-concatenated onto the 8x8
// feature map, one more block down to 4x4, then an affine head to one score.
template <class S>
struct DiscriminatorModel {
    int64_t img_size = 0, cond_dim = 128, c1 = 64, cond_ch = 64;
    int64_t feat_ch = 0;  // channels entering the injection point
    struct Block {
        nn::Param<S> w, b;  // w [cout, cin, 4, 4]
        nn::BatchNorm<S> bn;
        bool has_bn = true;
        int64_t cin = 0, cout = 0;
    };
    std::vector<Block> pre, post;
    nn::Param<S> cond_w, cond_b;  // [cond_ch, cond_dim]
    nn::Param<S> head_w, head_b;  // [1, flat]

    void init(Rng& rng, int64_t img, int64_t cond, int64_t base) {
        require(img >= 8 && is_power_of_two(img), Status::config,
                "discriminator: image size must be a power of two >= 8");
        require(cond > 0 && base >= 8, Status::config, "discriminator: bad dimensions");
        img_size = img;
        cond_dim = cond;
        c1 = base;
        cond_ch = base;
        pre.clear();
        post.clear();
        int64_t cur = 3;
        int64_t cout = c1;
        for (int64_t res = img; res > 8; res /= 2) {
            Block blk;
            blk.cin = cur;
            blk.cout = cout;
            blk.has_bn = !pre.empty();
            blk.w.resize({blk.cout, blk.cin, 4, 4});
            blk.b.resize({blk.cout});
            nn::init_normal(rng, blk.w.value, 0.0, 0.02);
            if (blk.has_bn) blk.bn.init(blk.cout);
            cur = cout;
            cout *= 2;
            pre.push_back(std::move(blk));
        }
        feat_ch = cur;  // 3 when img == 8 (injection on the raw image)
        cond_w.resize({cond_ch, cond_dim});
        cond_b.resize({cond_ch});
        nn::init_normal(rng, cond_w.value, 0.0, 0.02);
        Block blk;
        blk.cin = feat_ch + cond_ch;
        blk.cout = pre.empty() ? c1 : 2 * feat_ch;
        blk.has_bn = !pre.empty();
        blk.w.resize({blk.cout, blk.cin, 4, 4});
        blk.b.resize({blk.cout});
        nn::init_normal(rng, blk.w.value, 0.0, 0.02);
        if (blk.has_bn) blk.bn.init(blk.cout);
        post.push_back(std::move(blk));
        const int64_t flat = post.back().cout * 4 * 4;
        head_w.resize({1, flat});
        head_b.resize({1});
        nn::init_normal(rng, head_w.value, 0.0, 0.02);
    }

    struct BlockCache {
        Tensor<S> in;
        typename nn::BatchNorm<S>::Cache bnc;
        Tensor<S> act;
    };
    struct Cache {
        std::vector<BlockCache> pre_c, post_c;
        Tensor<S> psi;
        Tensor<S> cond;       // [N, cond_ch]
        Tensor<S> concat_in;  // [N, feat+cond, 8, 8]
        Tensor<S> flat;       // [N, flat]
        Tensor<S> scratch;
    };

    void run_block(Block& blk, BlockCache& bc, const Tensor<S>& in, bool train,
                   Tensor<S>& scratch) {
        bc.in = in;
        Tensor<S> conv;
        nn::conv2d_forward(in, blk.w, blk.b, 4, 2, 1, conv, scratch);
        if (blk.has_bn) {
            blk.bn.forward(conv, train, bc.act, train ? &bc.bnc : nullptr);
        } else {
            bc.act = std::move(conv);
        }
        nn::lrelu_forward(bc.act, 0.2);
    }

    std::vector<S> forward(const Tensor<S>& x, const Tensor<S>& psi, bool train, Cache& c) {
        require(x.ndim() == 4 && x.dim(1) == 3 && x.dim(2) == img_size && x.dim(3) == img_size,
                Status::shape, "discriminator: bad image shape " + x.shape_str());
        require(psi.ndim() == 2 && psi.dim(0) == x.dim(0) && psi.dim(1) == cond_dim,
                Status::shape, "discriminator: bad condition shape");
        const int64_t n = x.dim(0);
        c.psi = psi;
        c.pre_c.assign(pre.size(), BlockCache{});
        c.post_c.assign(post.size(), BlockCache{});
        const Tensor<S>* cur = &x;
        for (size_t i = 0; i < pre.size(); ++i) {
            run_block(pre[i], c.pre_c[i], *cur, train, c.scratch);
            cur = &c.pre_c[i].act;
        }
        nn::dense_forward(psi, cond_w, cond_b, c.cond);
        c.concat_in = Tensor<S>({n, feat_ch + cond_ch, 8, 8});
        for (int64_t i = 0; i < n; ++i) {
            std::copy(cur->ptr() + i * feat_ch * 64, cur->ptr() + (i + 1) * feat_ch * 64,
                      c.concat_in.ptr() + i * (feat_ch + cond_ch) * 64);
            for (int64_t ch = 0; ch < cond_ch; ++ch) {
                S* dst = c.concat_in.ptr() + (i * (feat_ch + cond_ch) + feat_ch + ch) * 64;
                std::fill(dst, dst + 64, c.cond.data[static_cast<size_t>(i * cond_ch + ch)]);
            }
        }
        const Tensor<S>* pcur = &c.concat_in;
        for (size_t i = 0; i < post.size(); ++i) {
            run_block(post[i], c.post_c[i], *pcur, train, c.scratch);
            pcur = &c.post_c[i].act;
        }
        c.flat = *pcur;
        c.flat.reshape({n, pcur->numel() / n});
        Tensor<S> scores2d;
        nn::dense_forward(c.flat, head_w, head_b, scores2d);
        std::vector<S> scores(static_cast<size_t>(n));
        for (int64_t i = 0; i < n; ++i) scores[static_cast<size_t>(i)] = scores2d.data[static_cast<size_t>(i)];
        return scores;
    }

    Tensor<S> back_block(Block& blk, BlockCache& bc, Tensor<S>& gact, bool need_gin,
                         Tensor<S>& scratch) {
        nn::lrelu_backward(bc.act, 0.2, gact);
        Tensor<S> gconv;
        if (blk.has_bn) {
            blk.bn.backward(bc.bnc, gact, gconv);
        } else {
            gconv = std::move(gact);
        }
        Tensor<S> gin;
        nn::conv2d_backward(bc.in, blk.w, blk.b, 4, 2, 1, gconv, need_gin ? &gin : nullptr,
                            scratch);
        return gin;
    }

    // gscores is d(loss)/d(score) per sample; gx receives the image gradient
    // when non-null. psi gradients are not produced (the encoder is frozen).
    void backward(Cache& c, const std::vector<S>& gscores, Tensor<S>* gx) {
        const int64_t n = c.flat.dim(0);
        Tensor<S> g2d({n, 1});
        for (int64_t i = 0; i < n; ++i) g2d.data[static_cast<size_t>(i)] = gscores[static_cast<size_t>(i)];
        Tensor<S> gflat;
        nn::dense_backward(c.flat, head_w, head_b, g2d, &gflat);
        gflat.reshape({n, post.back().cout, 4, 4});
        Tensor<S> gcur = std::move(gflat);
        for (size_t i = post.size(); i-- > 0;) {
            gcur = back_block(post[i], c.post_c[i], gcur, true, c.scratch);
        }
        // split the concat gradient into feature and condition parts
        Tensor<S> gfeat({n, feat_ch, 8, 8});
        Tensor<S> gcond({n, cond_ch});
        for (int64_t i = 0; i < n; ++i) {
            std::copy(gcur.ptr() + i * (feat_ch + cond_ch) * 64,
                      gcur.ptr() + i * (feat_ch + cond_ch) * 64 + feat_ch * 64,
                      gfeat.ptr() + i * feat_ch * 64);
            for (int64_t ch = 0; ch < cond_ch; ++ch) {
                const S* src = gcur.ptr() + (i * (feat_ch + cond_ch) + feat_ch + ch) * 64;
                double s = 0.0;
                for (int j = 0; j < 64; ++j) s += src[j];
                gcond.data[static_cast<size_t>(i * cond_ch + ch)] = static_cast<S>(s);
            }
        }
        nn::dense_backward<S>(c.psi, cond_w, cond_b, gcond, nullptr);
        gcur = std::move(gfeat);
        for (size_t i = pre.size(); i-- > 0;) {
            const bool need = i > 0 || gx != nullptr;
            gcur = back_block(pre[i], c.pre_c[i], gcur, need, c.scratch);
        }
        if (gx) *gx = std::move(gcur);
    }

    std::vector<nn::Param<S>*> params() {
        std::vector<nn::Param<S>*> p;
        for (auto& blk : pre) {
            p.push_back(&blk.w);
            p.push_back(&blk.b);
            if (blk.has_bn) {
                p.push_back(&blk.bn.gamma);
                p.push_back(&blk.bn.beta);
            }
        }
        p.push_back(&cond_w);
        p.push_back(&cond_b);
        for (auto& blk : post) {
            p.push_back(&blk.w);
            p.push_back(&blk.b);
            if (blk.has_bn) {
                p.push_back(&blk.bn.gamma);
                p.push_back(&blk.bn.beta);
            }
        }
        p.push_back(&head_w);
        p.push_back(&head_b);
        return p;
    }
};

using GeneratorF = GeneratorModel<float>;
using DiscriminatorF = DiscriminatorModel<float>;

// ---------------------------------------------------------------- loss ops

// Hinge discriminator loss with the augmentation block applied to real and
// fake under independent draws. Accumulates D parameter gradients.
struct DLossResult {
    double loss = 0.0;
    AugParams real_params, fake_params;
};

template <class S>
DLossResult d_loss_hinge(DiscriminatorModel<S>& d, const Tensor<S>& real,
                         const Tensor<S>& fake, const Tensor<S>& psi_real,
                         const Tensor<S>& psi_fake, const AugmentPolicy* pol, Rng* rng) {
    require(real.dim(0) > 0 && fake.dim(0) > 0, Status::shape, "d_loss_hinge: empty batch");
    DLossResult out;
    const int64_t h = real.dim(2), w = real.dim(3);
    Tensor<S> tr = real, tf = fake;
    AugCache<S> cr, cf;
    if (pol && pol->any()) {
        require(rng != nullptr, Status::internal, "d_loss_hinge: augmentation needs an rng");
        out.real_params = augment_draw(*pol, real.dim(0), h, w, *rng);
        out.fake_params = augment_draw(*pol, fake.dim(0), h, w, *rng);
        tr = augment_apply(real, out.real_params, &cr);
        tf = augment_apply(fake, out.fake_params, &cf);
    }
    typename DiscriminatorModel<S>::Cache dc_r, dc_f;
    const std::vector<S> sr = d.forward(tr, psi_real, true, dc_r);
    const std::vector<S> sf = d.forward(tf, psi_fake, true, dc_f);
    std::vector<S> gr, gf;
    out.loss = hinge_d_real(sr, &gr) + hinge_d_fake(sf, &gf);
    d.backward(dc_r, gr, nullptr);
    d.backward(dc_f, gf, nullptr);
    return out;
}

// Hinge generator loss through D and T; fills gfake with the gradient w.r.t.
// the raw (pre-augmentation) fake images. D parameter grads are clobbered as
// a side effect — callers zero them before their next D update.
template <class S>
double g_loss_hinge(DiscriminatorModel<S>& d, const Tensor<S>& fake, const Tensor<S>& psi,
                    const AugmentPolicy* pol, Rng* rng, Tensor<S>* gfake,
                    AugParams* params_out = nullptr) {
    require(fake.dim(0) > 0, Status::shape, "g_loss_hinge: empty batch");
    Tensor<S> tf = fake;
    AugCache<S> cf;
    const bool aug = pol && pol->any();
    if (aug) {
        require(rng != nullptr, Status::internal, "g_loss_hinge: augmentation needs an rng");
        AugParams par = augment_draw(*pol, fake.dim(0), fake.dim(2), fake.dim(3), *rng);
        if (params_out) *params_out = par;
        tf = augment_apply(fake, par, &cf);
    }
    typename DiscriminatorModel<S>::Cache dc;
    const std::vector<S> s = d.forward(tf, psi, true, dc);
    std::vector<S> gs;
    const double loss = hinge_g(s, &gs);
    if (gfake) {
        Tensor<S> gtf;
        d.backward(dc, gs, &gtf);
        *gfake = aug ? augment_backward(cf, gtf) : std::move(gtf);
    }
    return loss;
}

// Mode-seeking regularizer evaluated through two generator passes for the
// same conditions; accumulates G parameter gradients scaled by `weight`.
template <class S>
double mode_seeking_loss(GeneratorModel<S>& g, const Tensor<S>& psi, const Tensor<S>& z1,
                         const Tensor<S>& z2, double eps, double weight = 1.0) {
    typename GeneratorModel<S>::Cache c1, c2;
    const Tensor<S> i1 = g.forward(z1, psi, true, c1);
    const Tensor<S> i2 = g.forward(z2, psi, true, c2);
    Tensor<S> g1, g2;
    const double loss = mode_seeking_from_images(i1, i2, z1, z2, eps, &g1, &g2);
    if (weight != 1.0) {
        for (S& v : g1.data) v *= static_cast<S>(weight);
        for (S& v : g2.data) v *= static_cast<S>(weight);
    }
    g.backward(c1, g1);
    g.backward(c2, g2);
    return loss;
}

// ---------------------------------------------------------------- training

struct GanConfig {
    int steps = 2000;
    int batch = 16;
    double lr = 2e-4;
    double beta1 = 0.5, beta2 = 0.999;
    double alpha = 1.0;  // mode-seeking weight
    bool use_ms = true;
    bool use_aug = true;
    double ms_eps = 1e-5;
    int d_steps_per_g_step = 1;
    int image_size = 32;
    int z_dim = 128;
    int g_base_channels = 256;
    int d_base_channels = 64;
    AugmentPolicy policy{};
    uint64_t seed = 0;
    int log_every = 100;
    int sample_every = 0;      // PNG grids; 0 = off
    int checkpoint_every = 0;  // extra atomic checkpoints; 0 = final only
    int eval_per_class = 10;
    int is_splits = 10;
    ClassifierTrainConfig surrogate{};
};

struct GanEval {
    double is_mean = 0.0, is_std = 0.0;
    double consistency = 0.0;
    double diversity = 0.0;  // mean within-condition pairwise diversity
};

// First-step snapshot so tests can re-evaluate the losses from the exact
// inputs the trainer used.
struct StepTrace {
    GeneratorF g0;       // parameters before the step
    DiscriminatorF d0;   // before the D update
    DiscriminatorF d1;   // after the D update (used for the G loss)
    TensorF real, psi_real, psi_fake, psi_g;
    TensorF z_d, z_g1, z_g2;
    AugParams aug_real, aug_fake, aug_g;
    double d_loss = 0.0, g_adv = 0.0, ms = 0.0;
    bool filled = false;
};

struct GanTrainResult {
    double d_loss = 0.0, g_loss = 0.0, ms_loss = 0.0;
    GanEval last_eval{};
    int steps_run = 0;
};

GanTrainResult train_gan(const PairedDataset& ds, const EncoderF& encoder,
                         const GanConfig& cfg, const std::filesystem::path& out_dir,
                         GeneratorF& gen, DiscriminatorF& disc, StepTrace* trace = nullptr);

// Eval-mode generation (running batch-norm statistics).
TensorF generate(GeneratorF& gen, const TensorF& z, const TensorF& psi);

// Generates eval_per_class images per class conditioned on embeddings drawn
// from psi_pool (cycled per class) and scores them with the surrogate.
GanEval evaluate_gan(GeneratorF& gen, ClassifierF& clf, const TensorF& psi_pool,
                     const std::vector<int>& psi_labels, int num_classes, int per_class,
                     int is_splits, uint64_t seed, TensorF* images_out = nullptr,
                     std::vector<int>* labels_out = nullptr,
                     std::vector<double>* per_class_is_mean = nullptr,
                     std::vector<double>* per_class_is_std = nullptr);

void save_gan(const GeneratorF& gen, const DiscriminatorF& disc,
              const std::filesystem::path& dir, const std::string& config_json = "");
std::pair<GeneratorF, DiscriminatorF> load_gan(const std::filesystem::path& dir);

// Full held-out evaluation: trains the surrogate, scores generated samples,
// clusters the test-split embeddings, and (when out_dir is set) writes
// report.json, embeddings_2d.csv, per_class_is.csv, and samples.png.
struct EvalReport {
    GanEval gan{};
    double kmeans_acc = 0.0;      // test-split embedding clustering vs labels
    double classifier_acc = 0.0;  // surrogate top-1 on real test images
    std::vector<double> per_class_is_mean, per_class_is_std;
};

EvalReport evaluate_full(const PairedDataset& ds, const EncoderF& encoder, GeneratorF& gen,
                         const GanConfig& cfg, uint64_t seed,
                         const std::filesystem::path* out_dir);

std::string eval_report_json(const EvalReport& r);

// Sample sheet from held-out EEG: one grid row per class, `per_class`
// columns, eval-mode generation.
void generate_sheet(const PairedDataset& ds, const EncoderF& encoder, GeneratorF& gen,
                    int per_class, uint64_t seed, const std::filesystem::path& png_path);

std::string gan_config_json(const GanConfig& cfg);

// One grid row per class: images [N,3,H,W] with labels in [0,K); rows sorted
// by class, original order within a class.
void save_class_grid(const TensorF& images, const std::vector<int>& labels, int num_classes,
                     const std::filesystem::path& path);

}  // namespace e2i

#endif
