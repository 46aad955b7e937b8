from .checkpoint import load_checkpoint, model_fingerprint, save_checkpoint
from .config import (
    CLS_ID,
    MASK_ID,
    PAD_ID,
    SEP_ID,
    UNK_ID,
    ModelConfig,
    TrainConfig,
    init_params,
    param_order,
    param_shapes,
)
from .embeddings import (
    CodePrediction,
    EmbeddingStore,
    encode_text_cls,
    extract_embeddings,
    merge_stores,
    predict_codes,
)
from .encoder import encoder_forward, forward, mlm_logits, pad_batch
from .tokenizer import (
    EncodedSequence,
    Tokenizer,
    build_tokenizer,
    encode_patent,
    tokenize_text,
)
from .training import (
    Adam,
    grad_check,
    mask_batch,
    masked_accuracy,
    numeric_grad,
    train,
    train_val_test_split,
)

__all__ = [
    "Adam",
    "CLS_ID",
    "CodePrediction",
    "EmbeddingStore",
    "EncodedSequence",
    "MASK_ID",
    "ModelConfig",
    "PAD_ID",
    "SEP_ID",
    "Tokenizer",
    "TrainConfig",
    "UNK_ID",
    "build_tokenizer",
    "encode_patent",
    "encode_text_cls",
    "encoder_forward",
    "extract_embeddings",
    "forward",
    "grad_check",
    "init_params",
    "load_checkpoint",
    "mask_batch",
    "merge_stores",
    "masked_accuracy",
    "mlm_logits",
    "model_fingerprint",
    "numeric_grad",
    "pad_batch",
    "param_order",
    "param_shapes",
    "predict_codes",
    "save_checkpoint",
    "tokenize_text",
    "train",
    "train_val_test_split",
]
