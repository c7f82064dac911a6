from setuptools import setup, find_packages

setup(
    name="L1IndependenceLab",
    version="0.1.0",
    author="Pubudu",
    author_email="pubudu093@gmail.com",
    packages=find_packages(),
    py_modules=["app"],
    install_requires=[
        "click",
        "joblib",
        "numpy",
        "orjson",
        "pandas",
        "pydantic",
        "python-dotenv",
        "scipy",
        "tqdm",
    ],
    entry_points={"console_scripts": ["l1indep=app:cli"]},
)
