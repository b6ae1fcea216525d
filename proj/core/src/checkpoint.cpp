#include "vdst/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

namespace vdst {

std::vector<Var> ModelBundle::all_params() const {
    std::vector<Var> ps = backbone->parameters();
    for (const Var& p : teacher.parameters()) ps.push_back(p);
    for (const Var& p : student.parameters()) ps.push_back(p);
    return ps;
}

ModelBundle build_model(const RunConfig& cfg, int num_classes) {
    ModelBundle m;
    uint64_t seed = mix_seed(cfg.trainer.seed, cfg.encoder.seed);
    m.backbone = make_toy_backbone(cfg.encoder.patch_size, cfg.encoder.embed_dim, cfg.encoder.depth,
                                   seed);
    m.teacher = make_teacher_head(cfg.encoder.embed_dim, cfg.teacher.hidden_width,
                                  cfg.teacher.out_channels, num_classes, cfg.trainer.seed);
    m.student = make_student_head(cfg.encoder.embed_dim, cfg.student.hidden_width,
                                  cfg.student.out_channels, num_classes, cfg.student.temporal_kernel,
                                  cfg.trainer.seed);
    return m;
}

namespace {

constexpr char kMagic[8] = {'V', 'D', 'S', 'T', 'C', 'K', 'P', '1'};

void write_u32(std::ostream& os, uint32_t v) { os.write(reinterpret_cast<const char*>(&v), 4); }
void write_u64(std::ostream& os, uint64_t v) { os.write(reinterpret_cast<const char*>(&v), 8); }
void write_str(std::ostream& os, const std::string& s) {
    write_u32(os, static_cast<uint32_t>(s.size()));
    os.write(s.data(), static_cast<std::streamsize>(s.size()));
}
void write_tensor(std::ostream& os, const Tensor& t) {
    write_u32(os, static_cast<uint32_t>(t.shape.size()));
    for (int d : t.shape) write_u32(os, static_cast<uint32_t>(d));
    os.write(reinterpret_cast<const char*>(t.data()),
             static_cast<std::streamsize>(t.size() * sizeof(double)));
}

uint32_t read_u32(std::istream& is) {
    uint32_t v = 0;
    is.read(reinterpret_cast<char*>(&v), 4);
    return v;
}
uint64_t read_u64(std::istream& is) {
    uint64_t v = 0;
    is.read(reinterpret_cast<char*>(&v), 8);
    return v;
}
std::string read_str(std::istream& is) {
    uint32_t n = read_u32(is);
    std::string s(n, '\0');
    is.read(s.data(), n);
    return s;
}
Tensor read_tensor(std::istream& is) {
    uint32_t nd = read_u32(is);
    std::vector<int> shape;
    for (uint32_t i = 0; i < nd; ++i) shape.push_back(static_cast<int>(read_u32(is)));
    Tensor t(shape);
    is.read(reinterpret_cast<char*>(t.data()),
            static_cast<std::streamsize>(t.size() * sizeof(double)));
    return t;
}

void write_adam(std::ostream& os, const AdamState& a) {
    write_u64(os, static_cast<uint64_t>(a.t));
    write_u32(os, static_cast<uint32_t>(a.m.size()));
    for (const Tensor& t : a.m) write_tensor(os, t);
    for (const Tensor& t : a.v) write_tensor(os, t);
}

AdamState read_adam(std::istream& is) {
    AdamState a;
    a.t = static_cast<int64_t>(read_u64(is));
    uint32_t n = read_u32(is);
    for (uint32_t i = 0; i < n; ++i) a.m.push_back(read_tensor(is));
    for (uint32_t i = 0; i < n; ++i) a.v.push_back(read_tensor(is));
    return a;
}

} // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("save_checkpoint: cannot open '" + path + "' for writing");
    os.write(kMagic, 8);
    write_str(os, dump_run_config(ckpt.config));
    write_u32(os, static_cast<uint32_t>(ckpt.class_names.size()));
    for (const std::string& n : ckpt.class_names) write_str(os, n);
    write_u32(os, static_cast<uint32_t>(ckpt.epoch));
    write_u32(os, ckpt.student_trained ? 1 : 0);
    write_u32(os, static_cast<uint32_t>(ckpt.params.size()));
    for (const Tensor& t : ckpt.params) write_tensor(os, t);
    write_adam(os, ckpt.adam_backbone);
    write_adam(os, ckpt.adam_teacher);
    write_adam(os, ckpt.adam_student);
    if (!os) throw std::runtime_error("save_checkpoint: write failed for '" + path + "'");
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("load_checkpoint: cannot open '" + path + "'");
    char magic[8];
    is.read(magic, 8);
    if (!is || std::memcmp(magic, kMagic, 8) != 0)
        throw std::runtime_error("load_checkpoint: '" + path + "' is not a checkpoint file");
    Checkpoint ckpt;
    ckpt.config = parse_run_config(read_str(is));
    uint32_t n_names = read_u32(is);
    for (uint32_t i = 0; i < n_names; ++i) ckpt.class_names.push_back(read_str(is));
    ckpt.epoch = static_cast<int>(read_u32(is));
    ckpt.student_trained = read_u32(is) != 0;
    uint32_t n_params = read_u32(is);
    for (uint32_t i = 0; i < n_params; ++i) ckpt.params.push_back(read_tensor(is));
    ckpt.adam_backbone = read_adam(is);
    ckpt.adam_teacher = read_adam(is);
    ckpt.adam_student = read_adam(is);
    if (!is) throw std::runtime_error("load_checkpoint: truncated checkpoint '" + path + "'");
    return ckpt;
}

ModelBundle restore_model(const Checkpoint& ckpt) {
    ModelBundle m = build_model(ckpt.config, static_cast<int>(ckpt.class_names.size()));
    std::vector<Var> ps = m.all_params();
    if (ps.size() != ckpt.params.size())
        throw std::runtime_error("restore_model: checkpoint parameter count mismatch");
    for (size_t i = 0; i < ps.size(); ++i) {
        if (ps[i]->val.shape != ckpt.params[i].shape)
            throw std::runtime_error("restore_model: parameter shape mismatch at index " +
                                     std::to_string(i));
        ps[i]->val = ckpt.params[i];
    }
    return m;
}

} // namespace vdst
