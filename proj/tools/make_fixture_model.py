#!/usr/bin/env python3
# Copyright 2026 The appsim Authors.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""Writes the tiny VGG-shaped ONNX model used by the inference tests.

The network keeps VGG19's downsampling schedule (four 2x2 pools before
conv5_1, one after) with very few channels, so a 224x224 input yields a
14x14 conv5_1 map while the file stays a few tens of kilobytes.

    python3 tools/make_fixture_model.py tests/data/mini_vgg.onnx
"""
import sys

import numpy as np
import onnx
from onnx import TensorProto, helper, numpy_helper

rng = np.random.default_rng(7)
nodes, inits = [], []


def weight(name, shape, fan_in):
    w = (rng.standard_normal(shape) * np.sqrt(2.0 / fan_in)).astype(np.float32)
    inits.append(numpy_helper.from_array(w, name))
    return name


def conv_relu(x, name, cin, cout):
    w = weight(name + "_w", (cout, cin, 3, 3), cin * 9)
    b = weight(name + "_b", (cout,), 1.0)
    nodes.append(helper.make_node("Conv", [x, w, b], [name + "_pre"], name=name + "_pre",
                                  kernel_shape=[3, 3], pads=[1, 1, 1, 1]))
    nodes.append(helper.make_node("Relu", [name + "_pre"], [name], name=name))
    return name


def pool(x, name):
    nodes.append(helper.make_node("MaxPool", [x], [name], name=name,
                                  kernel_shape=[2, 2], strides=[2, 2]))
    return name


def dense(x, name, nin, nout, relu=True):
    w = weight(name + "_w", (nout, nin), nin)
    b = weight(name + "_b", (nout,), 1.0)
    out = name + "_pre" if relu else name
    nodes.append(helper.make_node("Gemm", [x, w, b], [out], name=out, transB=1))
    if relu:
        nodes.append(helper.make_node("Relu", [out], [name], name=name))
    return name


x = "input"
x = pool(conv_relu(x, "conv1_1", 3, 4), "pool1")
x = pool(conv_relu(x, "conv2_1", 4, 4), "pool2")
x = pool(conv_relu(x, "conv3_1", 4, 4), "pool3")
x = pool(conv_relu(x, "conv4_1", 4, 4), "pool4")
c5 = conv_relu(x, "conv5_1", 4, 8)
nodes.append(helper.make_node("GlobalAveragePool", [c5], ["avg_pool"], name="avg_pool"))
x = pool(c5, "pool5")
nodes.append(helper.make_node("Flatten", [x], ["flatten"], name="flatten", axis=1))
x = dense("flatten", "fc6", 8 * 7 * 7, 16)
x = dense(x, "fc7", 16, 16)
x = dense(x, "fc8", 16, 10, relu=False)
nodes.append(helper.make_node("Softmax", [x], ["prob"], name="prob", axis=1))

graph = helper.make_graph(
    nodes, "mini_vgg",
    [helper.make_tensor_value_info("input", TensorProto.FLOAT, [1, 3, 224, 224])],
    [helper.make_tensor_value_info("prob", TensorProto.FLOAT, [1, 10]),
     helper.make_tensor_value_info("avg_pool", TensorProto.FLOAT, [1, 8, 1, 1])],
    inits)
model = helper.make_model(graph, opset_imports=[helper.make_opsetid("", 11)])
model.ir_version = 6
onnx.checker.check_model(model)
onnx.save(model, sys.argv[1] if len(sys.argv) > 1 else "mini_vgg.onnx")
