from .spec import ConvAsMatrix, FullyConnected, LSTMBlock, NetworkSpec, cnn_mnist, fcn_mnist, lstm_wp, toy
from .im2col import im2col, col2im
from .model import FeedForwardNet, LSTMNet
from .trainer import (
    ANALOG_SGD,
    ANALOG_TIKI_TAKA,
    FP,
    CalibrationError,
    NetworkState,
    TrainerConfig,
    evaluate,
    fp_forward_backward,
    train_epoch,
    train_step,
)

im2col_map = im2col
