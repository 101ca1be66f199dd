from .adam import AdamState, adam_step
from .layers import (
    BatchNormLayer,
    ConvLayer,
    ReLU,
    bn_backward,
    bn_forward,
    complex_to_planes,
    conv_backward,
    conv_forward,
    planes_to_complex,
    relu_backward,
    relu_forward,
)
from .model import CnnModel, build_model, param_count, predict
from .training import TrainConfig, TrainResult, evaluate_loss, mse_loss, train
