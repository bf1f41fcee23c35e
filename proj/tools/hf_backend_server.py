#!/usr/bin/env python3
"""Serve a Hugging Face causal LM over the psteer HTTP backend protocol.

    python3 tools/hf_backend_server.py --model EleutherAI/pythia-160m --port 8765
    PSTEER_SMOKE_URL=http://127.0.0.1:8765 build/tests/acceptance

Completion positions are the prefill tokens followed by the generated ones.
Generated token k comes out of the forward pass over the previous token, so
that is where the injections firing at k are added; the prefill positions
carry the injections firing at k = 0. /generate and /capture never touch
prompt positions; /choice steers only the last one, where the answer is read.

--tiny-random builds an untrained two-layer GPT-2 with a byte-level tokenizer
trained on the fly. It needs no download and only exercises the protocol.
"""

import argparse
import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import torch
from transformers import AutoModelForCausalLM, AutoTokenizer


def tiny_random():
    from tokenizers import ByteLevelBPETokenizer
    from transformers import GPT2Config, GPT2LMHeadModel, PreTrainedTokenizerFast

    corpus = ["I am calm and steady.", "I worry about things.", "A B C D E", "Tell me about yourself.",
              "I would talk to my friend.", "You are a person."] * 20
    bpe = ByteLevelBPETokenizer()
    bpe.train_from_iterator(corpus, vocab_size=300, min_frequency=1, special_tokens=["<eos>"])
    tokenizer = PreTrainedTokenizerFast(tokenizer_object=bpe, eos_token="<eos>")
    torch.manual_seed(0)
    config = GPT2Config(vocab_size=len(tokenizer), n_positions=512, n_embd=32, n_layer=2, n_head=2,
                        eos_token_id=tokenizer.eos_token_id)
    return "tiny-random-gpt2", GPT2LMHeadModel(config).eval(), tokenizer


def decoder_layers(model):
    for path in ("model.layers", "transformer.h", "gpt_neox.layers", "model.decoder.layers"):
        obj = model
        try:
            for part in path.split("."):
                obj = getattr(obj, part)
            return list(obj)
        except AttributeError:
            continue
    raise SystemExit("cannot locate the decoder layers of this architecture")


class Backend:
    def __init__(self, model_id, model, tokenizer):
        self.model_id, self.model, self.tokenizer = model_id, model, tokenizer
        self.layers = decoder_layers(model)
        self.hidden = model.config.hidden_size
        self.lock = threading.Lock()
        self.additions = {}  # layer -> [seq, hidden] tensor for the current forward pass
        for i, layer in enumerate(self.layers):
            layer.register_forward_hook(self._hook(i))

    def _hook(self, index):
        def add(_module, _inputs, output):
            delta = self.additions.get(index)
            if delta is None:
                return output
            hidden = output[0] if isinstance(output, tuple) else output
            hidden = hidden + delta.to(hidden.dtype).unsqueeze(0)
            return (hidden,) + tuple(output[1:]) if isinstance(output, tuple) else hidden
        return add

    def info(self):
        return {"model_id": self.model_id, "layer_count": len(self.layers), "hidden_dim": self.hidden,
                "capabilities": {"supports_prefill": True, "supports_constrained_choice": True,
                                 "supports_activation_capture": True, "supports_live_control": False}}

    def _prompt_ids(self, system, user):
        if getattr(self.tokenizer, "chat_template", None):
            messages = ([{"role": "system", "content": system}] if system else []) + [{"role": "user", "content": user}]
            text = self.tokenizer.apply_chat_template(messages, tokenize=False, add_generation_prompt=True)
        else:
            text = "\n\n".join(p for p in (system, user) if p) + "\n\n"
        return self.tokenizer(text, add_special_tokens=False)["input_ids"]

    def _split(self, req):
        prompt = self._prompt_ids(req.get("system", ""), req.get("user", ""))
        prefill = self.tokenizer(req.get("prefill", ""), add_special_tokens=False)["input_ids"] if req.get("prefill") else []
        return prompt, prefill

    @staticmethod
    def _fires(inj, k):
        window = inj.get("window")
        if window is not None and not (window[0] <= k < window[1]):
            return False
        return k % inj.get("stride", 1) == 0

    def _set_additions(self, injections, positions):
        """positions: list of (row, k) pairs in the current forward pass."""
        self.additions = {}
        rows = max((r for r, _ in positions), default=-1) + 1
        for inj in injections:
            vec = torch.tensor(inj["vector"], dtype=torch.float32) * float(inj["alpha"])
            for row, k in positions:
                if not self._fires(inj, k):
                    continue
                delta = self.additions.setdefault(inj["layer"], torch.zeros(rows, self.hidden))
                delta[row] += vec
        return any(self._fires(inj, k) for inj in injections for _, k in positions)

    @torch.no_grad()
    def generate(self, req):
        prompt, prefill = self._split(req)
        injections = req.get("injections", [])
        ids = torch.tensor([prompt + prefill])
        n = len(prompt) + len(prefill)
        with self.lock:
            fired = self._set_additions(injections, [(r, 0) for r in range(len(prompt), n)]) if prefill else False
            out = self.model(input_ids=ids, use_cache=True)
            past, logits = out.past_key_values, out.logits[0, -1]
            tokens, injected = [], []
            for k in range(int(req.get("max_new_tokens", 64))):
                if k > 0:
                    fired = self._set_additions(injections, [(0, k)])
                    out = self.model(input_ids=torch.tensor([[next_id]]), past_key_values=past, use_cache=True)
                    past, logits = out.past_key_values, out.logits[0, -1]
                next_id = self._pick(logits, req)
                if next_id == self.tokenizer.eos_token_id:
                    break
                tokens.append(self.tokenizer.decode([next_id]))
                injected.append(bool(fired))
            self.additions = {}
        return {"tokens": tokens, "injected": injected}

    @staticmethod
    def _pick(logits, req):
        if req.get("greedy", True) or float(req.get("temperature", 0.0)) == 0.0:
            return int(torch.argmax(logits))
        probs = torch.softmax(logits.float() / float(req["temperature"]), dim=-1)
        top_p = float(req.get("top_p", 1.0))
        sorted_p, order = torch.sort(probs, descending=True)
        keep = torch.cumsum(sorted_p, 0) - sorted_p < top_p
        sorted_p = sorted_p * keep
        return int(order[torch.multinomial(sorted_p / sorted_p.sum(), 1)])

    @torch.no_grad()
    def capture(self, req):
        prompt, prefill = self._split(req)
        if not prefill:
            return {"error": "empty_prefill"}
        with self.lock:
            self.additions = {}
            out = self.model(input_ids=torch.tensor([prompt + prefill]), output_hidden_states=True)
        rows = [h[0, len(prompt):].float().mean(0).tolist() for h in out.hidden_states[1:]]
        return {"activations": rows}

    @torch.no_grad()
    def choice(self, req):
        prompt, _ = self._split(req)
        ids = []
        for option in req["options"]:
            tok = self.tokenizer(option, add_special_tokens=False)["input_ids"]
            if len(tok) != 1:
                return {"error": "unsupported_option", "detail": f"option {option!r} is {len(tok)} tokens"}
            ids.append(tok[0])
        with self.lock:
            # the answer position is the first completion position
            self._set_additions(req.get("injections", []), [(len(prompt) - 1, 0)])
            logits = self.model(input_ids=torch.tensor([prompt])).logits[0, -1]
            self.additions = {}
        best = max(range(len(ids)), key=lambda i: float(logits[ids[i]]))
        return {"label": req["options"][best]}


def serve(backend, host, port):
    routes = {"/generate": backend.generate, "/capture": backend.capture, "/choice": backend.choice}

    class Handler(BaseHTTPRequestHandler):
        def _reply(self, status, body):
            data = json.dumps(body).encode()
            self.send_response(status)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(data)))
            self.end_headers()
            self.wfile.write(data)

        def do_GET(self):
            if self.path == "/info":
                self._reply(200, backend.info())
            else:
                self._reply(404, {"error": "not_found"})

        def do_POST(self):
            handler = routes.get(self.path)
            if handler is None:
                self._reply(404, {"error": "not_found"})
                return
            try:
                req = json.loads(self.rfile.read(int(self.headers.get("Content-Length", 0))))
                self._reply(200, handler(req))
            except (KeyError, ValueError, TypeError) as e:
                self._reply(400, {"error": "bad_request", "detail": str(e)})

        def log_message(self, *_):
            pass

    server = ThreadingHTTPServer((host, port), Handler)
    print(f"serving {backend.model_id} on http://{host}:{server.server_address[1]}", flush=True)
    server.serve_forever()


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--model", help="hub id or local path of a causal LM")
    parser.add_argument("--tiny-random", action="store_true", help="untrained toy model for protocol checks")
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8765)
    parser.add_argument("--dtype", default="float32", choices=["float32", "bfloat16", "float16"])
    args = parser.parse_args()
    if args.tiny_random:
        model_id, model, tokenizer = tiny_random()
    elif args.model:
        tokenizer = AutoTokenizer.from_pretrained(args.model)
        model = AutoModelForCausalLM.from_pretrained(args.model, torch_dtype=getattr(torch, args.dtype)).eval()
        model_id = args.model
    else:
        parser.error("give --model or --tiny-random")
    serve(Backend(model_id, model, tokenizer), args.host, args.port)


if __name__ == "__main__":
    main()
