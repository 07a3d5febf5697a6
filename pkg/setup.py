from setuptools import setup

setup(
    name='roblev',
    version='0.1.0',
    packages=['roblev'],
    package_data={
        'roblev': ['data/*.csv'],
    },
    install_requires=[
        'numpy',
        'scipy',
    ],
    entry_points={
        'console_scripts': [
            'roblev = roblev.__main__:main'
        ]
    },
)
