// Command-line entry point: staged training, evaluation, terminal chat and the HTTP service.

#include <CLI11.hpp>
#include <csignal>
#include <iostream>

#include "modeswitch/pipeline.hpp"
#include "modeswitch/service.hpp"

using namespace modeswitch;

namespace {

int fail(const std::string& kind, const std::string& msg, int code = 1) {
  std::cerr << Json{{"error", msg}, {"kind", kind}}.dump() << std::endl;
  return code;
}

ChatService* g_service = nullptr;

extern "C" void on_signal(int) {
  if (g_service) g_service->stop();
}

std::pair<std::string, int> parse_bind(const std::string& s) {
  const auto colon = s.rfind(':');
  if (colon == std::string::npos) throw std::invalid_argument("--bind expects host:port");
  const int port = std::stoi(s.substr(colon + 1));
  if (port < 0 || port > 65535) throw std::invalid_argument("--bind port out of range");
  return {s.substr(0, colon), port};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Mode-switching dialogue models: training, evaluation and chat"};
  app.require_subcommand(1);

  std::string config_path, corpus, out;
  std::optional<std::uint64_t> seed;
  app.add_option("--config", config_path, "JSON run configuration")->check(CLI::ExistingFile);
  app.add_option("--corpus", corpus, "corpus JSON-lines file");
  app.add_option("--out", out, "output directory");
  app.add_option("--seed", seed, "seed for every stage");

  std::size_t n = 0;
  auto* gen = app.add_subcommand("gen-data", "write the seeded synthetic corpus");
  gen->add_option("--n", n, "number of dialogues");
  auto* prepare = app.add_subcommand("prepare", "validate the corpus and build the vocabulary");
  auto* t_unified = app.add_subcommand("train-unified", "stage 1: train the unified language model");
  auto* t_cls = app.add_subcommand("train-classifier", "train the mode classifier");
  bool ablation = false;
  auto* t_disc = app.add_subcommand("train-discrete", "stage 2: prompt tuning with discrete prompts");
  t_disc->add_flag("--ablation", ablation, "train the prompt-stripped twin instead");
  auto* t_bridge = app.add_subcommand("train-bridge", "stage 3: train the bridge on frozen backbones");

  std::string model = "continuous", split = "test";
  auto* eval = app.add_subcommand("evaluate", "score a model on a split");
  eval->add_option("--model", model, "unified, discrete, ablation or continuous");
  eval->add_option("--split", split, "train, valid or test");

  auto* chat = app.add_subcommand("chat", "interactive terminal chat");
  chat->add_option("--model", model, "unified, discrete or continuous");

  std::string bind = "127.0.0.1:8080";
  bool persist = false;
  auto* serve = app.add_subcommand("serve", "HTTP chat service");
  serve->add_option("--model", model, "default model for new sessions");
  serve->add_option("--bind", bind, "host:port");
  serve->add_flag("--persist", persist, "keep session transcripts under <out>/sessions");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail("usage", e.what(), 2);
  }

  try {
    RunConfig cfg = config_path.empty() ? RunConfig{} : RunConfig::load(config_path);
    if (!corpus.empty()) cfg.corpus = corpus;
    if (!out.empty()) cfg.out = out;
    if (seed) {
      cfg.seed = *seed;
      for (TrainConfig* t : {&cfg.train.unified, &cfg.train.classifier, &cfg.train.discrete, &cfg.train.bridge}) {
        t->seed = *seed;
      }
    }
    Pipeline p(cfg, std::cerr);

    if (*gen) p.gen_data(n == 0 ? cfg.synthetic_dialogues : n);
    if (*prepare) p.prepare();
    if (*t_unified) p.train_unified();
    if (*t_cls) p.train_classifier();
    if (*t_disc) p.train_discrete(ablation);
    if (*t_bridge) p.train_bridge();
    if (*eval) std::cout << p.evaluate(model, parse_split(split)).to_json().dump(2) << std::endl;
    if (*chat) {
      const auto kind = parse_model_kind(model);
      const auto stack = ModelStack::load(cfg.out, cfg.decode);
      if (!stack.has(kind)) return fail("missing_prerequisite", "model " + model + " has no checkpoints in " + cfg.out.string());
      chat_repl(stack, kind, cfg.seed, std::cin, std::cout);
    }
    if (*serve) {
      const auto [host, port] = parse_bind(bind);
      auto stack = std::make_shared<const ModelStack>(ModelStack::load(cfg.out, cfg.decode));
      if (stack->available().empty()) return fail("missing_prerequisite", "no checkpoints in " + cfg.out.string());
      ServiceOptions opts;
      opts.host = host;
      opts.port = port;
      opts.default_model = parse_model_kind(model);
      opts.seed = cfg.seed;
      if (persist) opts.session_dir = p.layout().sessions();
      ServeLock lock(p.layout().lock());
      ChatService svc(stack, opts);
      const int bound = svc.bind();
      g_service = &svc;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      std::cerr << Json{{"listening", host + ":" + std::to_string(bound)}, {"models", stack->available()}}.dump()
                << std::endl;
      svc.run();
      g_service = nullptr;
    }
  } catch (const MissingPrerequisite& e) {
    return fail("missing_prerequisite", e.what());
  } catch (const OutputLocked& e) {
    return fail("locked", e.what());
  } catch (const CheckpointError& e) {
    return fail("checkpoint", e.what());
  } catch (const CorpusError& e) {
    return fail("corpus", e.what());
  } catch (const DivergenceError& e) {
    return fail("diverged", e.what());
  } catch (const std::invalid_argument& e) {
    return fail("invalid_argument", e.what());
  } catch (const std::exception& e) {
    return fail("error", e.what());
  }
  return 0;
}
